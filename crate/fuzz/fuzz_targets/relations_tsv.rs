#![no_main]

use bridge_index::forest::filter_relations;
use bridge_index::ingest::parse_relations_tsv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match parse_relations_tsv(text) {
        Ok(edges) => {
            let kept = filter_relations(&edges);
            assert!(kept.len() <= edges.len());
        }
        Err(e) => assert!(e.line >= 1 && e.line <= text.lines().count()),
    }
});
