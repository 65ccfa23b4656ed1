#![no_main]

use bridge_index::EntityDictionary;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(dict) = EntityDictionary::decode_segment(data) {
        let mut bytes = Vec::new();
        dict.encode_segment(&mut bytes);
        let again = EntityDictionary::decode_segment(&bytes).expect("re-encoded dictionary decodes");
        assert_eq!(again.len(), dict.len());
    }
});
