#![no_main]

use bridge_index::ingest::chunk_document;
use bridge_index::text::{canonicalize, clean_text, raw_tokens};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let [len, rest @ ..] = data else { return };
    let text = String::from_utf8_lossy(rest);
    let cleaned = clean_text(&text);
    let chunk_len = 16 + *len as usize % 64;
    let chunks = chunk_document(&cleaned, chunk_len);
    assert!(chunks.iter().all(|c| !c.is_empty()));
    let rejoined: Vec<&str> = chunks.iter().flat_map(|c| raw_tokens(c)).collect();
    let original: Vec<&str> = raw_tokens(&cleaned).collect();
    assert_eq!(rejoined, original);
    let _ = canonicalize(&text);
});
