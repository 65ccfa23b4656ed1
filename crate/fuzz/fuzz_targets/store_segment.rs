#![no_main]

use bridge_index::ChunkStore;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(store) = ChunkStore::decode_segment(data) {
        let mut bytes = Vec::new();
        store.encode_segment(&mut bytes);
        let again = ChunkStore::decode_segment(&bytes).expect("re-encoded store decodes");
        let mut twice = Vec::new();
        again.encode_segment(&mut twice);
        assert_eq!(twice, bytes);
    }
});
