#![no_main]

use bridge_index::IndexBundle;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(bundle) = IndexBundle::from_bytes(data) {
        let bytes = bundle.to_bytes();
        let again = IndexBundle::from_bytes(&bytes).expect("re-encoded index decodes");
        assert_eq!(again.to_bytes(), bytes);
    }
});
