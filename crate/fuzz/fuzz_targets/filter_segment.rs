#![no_main]

use bridge_index::CuckooIndex;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(filter) = CuckooIndex::decode_segment(data, 500, 1) {
        let mut bytes = Vec::new();
        filter.encode_segment(&mut bytes);
        let again = CuckooIndex::decode_segment(&bytes, 500, 1).expect("re-encoded filter decodes");
        let mut twice = Vec::new();
        again.encode_segment(&mut twice);
        assert_eq!(twice, bytes);
        let _ = filter.stats();
    }
});
