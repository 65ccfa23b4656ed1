#![no_main]

use bridge_index::embed::decode_embed_response;
use libfuzzer_sys::fuzz_target;

// Byte 0 is the expected vector count, byte 1 the dimension; the rest is the body.
fuzz_target!(|data: &[u8]| {
    let [count, dim, body @ ..] = data else { return };
    let (count, dim) = (*count as usize % 8, *dim as usize % 16 + 1);
    if let Ok(vectors) = decode_embed_response(body, count, dim) {
        assert_eq!(vectors.len(), count);
        for v in &vectors {
            assert_eq!(v.dim(), dim);
            assert!((v.norm() - 1.0).abs() < 1e-3);
        }
    }
});
