#![no_main]

use bridge_index::ingest::parse_corpus_jsonl;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match parse_corpus_jsonl(text) {
        Ok(docs) => assert!(docs.iter().all(|d| !d.text.is_empty())),
        Err(e) => assert!(e.line >= 1 && e.line <= text.lines().count()),
    }
});
