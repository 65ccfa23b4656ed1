#![no_main]

use bridge_index::ingest::parse_entities_jsonl;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match parse_entities_jsonl(text) {
        Ok(entities) => {
            let unique: std::collections::HashSet<&String> = entities.iter().collect();
            assert_eq!(unique.len(), entities.len());
        }
        Err(e) => assert!(e.line >= 1 && e.line <= text.lines().count()),
    }
});
