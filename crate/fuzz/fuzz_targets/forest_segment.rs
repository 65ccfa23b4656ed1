#![no_main]

use bridge_index::Forest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(forest) = Forest::decode_segment(data) {
        let shape = forest.shape();
        assert!(shape.max_depth <= forest.len());
        let mut bytes = Vec::new();
        forest.encode_segment(&mut bytes);
        assert_eq!(Forest::decode_segment(&bytes).expect("re-encoded forest decodes"), forest);
    }
});
