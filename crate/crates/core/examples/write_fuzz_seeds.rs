//! Writes seed inputs for every fuzz target under `fuzz/corpus/<target>/`.
//!
//! Usage: `cargo run -p bridge-index --example write_fuzz_seeds [out_dir]`

use std::fs;
use std::path::Path;

use bridge_index::ingest::{build_index, parse_corpus_jsonl};
use bridge_index::{Config, CuckooIndex};

const CORPUS: &str = include_str!("../tests/fixtures/mini_corpus.jsonl");

fn write(root: &Path, target: &str, seeds: &[Vec<u8>]) -> std::io::Result<()> {
    let dir = root.join(target);
    fs::create_dir_all(&dir)?;
    for (i, seed) in seeds.iter().enumerate() {
        fs::write(dir.join(format!("seed-{i:02}")), seed)?;
    }
    Ok(())
}

fn encoded(f: impl FnOnce(&mut Vec<u8>)) -> Vec<u8> {
    let mut out = Vec::new();
    f(&mut out);
    out
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args().nth(1).unwrap_or_else(|| "fuzz/corpus".into());
    let root = Path::new(&root);

    let docs = parse_corpus_jsonl(CORPUS)?;
    let config = Config {
        chunk_len: 32,
        ..Config::default()
    };
    let (bundle, _) = build_index(&docs, config)?;
    let (empty, _) = build_index(&[], Config::default())?;
    let index = bundle.to_bytes();

    write(root, "index_file", &[index.clone(), index[..index.len() / 3].to_vec(), empty.to_bytes()])?;
    let tiny = CuckooIndex::new(2, 500, 1)?;
    write(
        root,
        "filter_segment",
        &[
            encoded(|o| bundle.filter().encode_segment(o)),
            encoded(|o| tiny.encode_segment(o)),
        ],
    )?;
    write(root, "forest_segment", &[encoded(|o| bundle.forest.encode_segment(o))])?;
    write(
        root,
        "store_segment",
        &[
            encoded(|o| bundle.store.encode_segment(o)),
            encoded(|o| empty.store.encode_segment(o)),
        ],
    )?;
    write(root, "dictionary_segment", &[encoded(|o| bundle.dictionary.encode_segment(o))])?;

    let mut broken: Vec<&str> = CORPUS.lines().take(4).collect();
    broken.push("{\"doc_id\": \"x\"}");
    write(root, "corpus_jsonl", &[CORPUS.as_bytes().to_vec(), broken.join("\n").into_bytes()])?;

    let entities: String = bundle
        .dictionary
        .iter()
        .take(20)
        .map(|(e, _)| format!("{}\n", serde_json::json!({ "entity": e })))
        .collect();
    write(root, "entities_jsonl", &[entities.into_bytes(), b"{\"entity\": \"\"}\n".to_vec()])?;

    let tsv = "child\tparent\tkind\tconfidence\n\
               horner's syndrome\tsympathetic pathway\tbelongs_to\t2\n\
               sympathetic pathway\thorner's syndrome\tdepends_on\t1\n\
               # comment\n\
               pupil\teye\tcontains\t3\n";
    write(root, "relations_tsv", &[tsv.as_bytes().to_vec(), b"a\tb\tbelongs_to\n".to_vec()])?;

    let mut ok = vec![2u8, 2];
    ok.extend_from_slice(br#"{"vectors": [[1.0, 0.0, 0.0], [0.5, 0.5, 0.0]]}"#);
    let mut wrong = vec![1u8, 2];
    wrong.extend_from_slice(br#"{"vectors": [[0.0, 0.0]]}"#);
    write(root, "embed_response", &[ok, wrong])?;

    let mut text = vec![16u8];
    text.extend_from_slice(docs[0].text.as_bytes());
    let mut odd = vec![3u8];
    odd.extend_from_slice("  \u{130}STANBUL\tclinic.\n\"Quoted!\" end ".as_bytes());
    write(root, "text_pipeline", &[text, odd])?;
    Ok(())
}
