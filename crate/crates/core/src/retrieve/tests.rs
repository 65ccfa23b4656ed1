use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::cuckoo::CuckooIndex;
use crate::embed::{Embedder, HashingEmbedder};
use crate::forest::{build_abstracts, LeadSentences, RelationEdge, RelationKind};

/// Bundle over `n` generated chunks, with abstract `i` under `parents[i]`
/// and each entity mapped to the given abstracts.
fn bundle(n: usize, parents: &[(PairId, PairId)], entities: &[(&str, &[PairId])]) -> IndexBundle {
    let cfg = Config::default();
    let e = HashingEmbedder::new(cfg.embed_dim);
    let mut store = ChunkStore::new(cfg.embed_dim);
    let texts: Vec<String> = (0..n)
        .map(|i| format!("Chunk {i} talks about topic{} and item{}.", i % 7, i % 3))
        .collect();
    for t in &texts {
        store.push(t.clone(), &e.embed(t).unwrap());
    }
    let map: BTreeMap<String, PairId> = (0..n.div_ceil(5) as PairId).map(|i| (format!("a{i}"), i)).collect();
    let edges: Vec<RelationEdge> = parents
        .iter()
        .map(|(c, p)| RelationEdge::new(format!("a{c}"), format!("a{p}"), RelationKind::BelongsTo))
        .collect();
    let (forest, report) = Forest::assemble(build_abstracts(&texts, &LeadSentences), &edges, &map);
    assert_eq!(report.installed, edges.len());
    let mut filter = CuckooIndex::with_defaults(1);
    let mut dict = EntityDictionary::new();
    for (name, ids) in entities {
        dict.insert(name.to_string(), ids.len() as u32);
        for &id in *ids {
            filter.insert(name, id).unwrap();
        }
    }
    IndexBundle::new(cfg, store, forest, dict, filter, Box::new(e))
}

fn opts(k: usize, d: usize) -> RetrieveOptions {
    RetrieveOptions { k, max_depth: d, resort: true }
}

#[test]
fn select_top_k_orders_by_score() {
    let mut store = ChunkStore::new(2);
    for s in [0.9f64, 0.5, 0.1] {
        let v = EmbeddingVector::normalized(&[s, (1.0 - s * s).sqrt()]).unwrap();
        store.push(String::new(), &v);
    }
    let q = EmbeddingVector::normalized(&[1.0, 0.0]).unwrap();
    let got = select_top_k(&[0, 1, 2], &q, 2, &store);
    assert_eq!(got.iter().map(|c| c.id).collect::<Vec<_>>(), vec![0, 1]);
    assert!((got[0].score - 0.9).abs() < 1e-6);
    let all = select_top_k(&[2, 0, 1], &q, 10, &store);
    assert_eq!(all.iter().map(|c| c.id).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert!(select_top_k(&[], &q, 3, &store).is_empty());
}

#[test]
fn select_top_k_breaks_ties_by_lower_id() {
    let mut store = ChunkStore::new(2);
    for _ in 0..4 {
        store.push(String::new(), &EmbeddingVector::basis(2));
    }
    let q = EmbeddingVector::basis(2);
    let got = select_top_k(&[3, 1, 2, 0], &q, 2, &store);
    assert_eq!(got.iter().map(|c| c.id).collect::<Vec<_>>(), vec![0, 1]);
}

#[test]
fn recognizes_longest_entity() {
    let mut d = EntityDictionary::new();
    d.insert("horner's syndrome".into(), 1);
    d.insert("iron-sulfur protein".into(), 1);
    d.insert("protein".into(), 1);
    assert_eq!(recognize_query_entities("what causes horner's syndrome?", &d), vec!["horner's syndrome"]);
    assert_eq!(recognize_query_entities("an iron-sulfur protein", &d), vec!["iron-sulfur protein"]);
    assert!(recognize_query_entities("unrelated words", &d).is_empty());
}

#[test]
fn entity_under_parent_and_child_expands_to_three_abstracts() {
    let b = bundle(50, &[(4, 1), (9, 4)], &[("zeta", &[4])]);
    let r = retrieve_context("tell me about zeta", &opts(100, 1), &b).unwrap();
    assert!(!r.fallback);
    assert_eq!(r.initial_abstracts, [4].into());
    assert_eq!(r.expanded_abstracts, [1, 4, 9].into());
    let want: Vec<ChunkId> = (5..10).chain(20..25).chain(45..50).collect();
    assert_eq!(r.candidate_chunks, want);
    assert_eq!(r.selected_chunks.len(), 15);
}

#[test]
fn zero_entity_query_falls_back_to_full_scan() {
    let b = bundle(23, &[], &[("zeta", &[0])]);
    let r = retrieve_context("topic3 item1", &opts(4, 3), &b).unwrap();
    assert!(r.fallback);
    assert_eq!(r.candidate_chunks.len(), 23);
    let q = b.embedder().embed("topic3 item1").unwrap();
    let all: Vec<ChunkId> = (0..23).collect();
    assert_eq!(r.selected_chunks, select_top_k(&all, &q, 4, &b.store));
    assert_eq!(b.filter().temperature("zeta"), Some(0));
}

#[test]
fn result_invariants_hold() {
    let b = bundle(60, &[(1, 0), (2, 1), (3, 2), (5, 4)], &[("zeta", &[2, 5]), ("eta", &[11])]);
    for (q, d) in [("zeta", 1), ("zeta eta", 2), ("eta topic1", 3)] {
        let r = retrieve_context(q, &opts(5, d), &b).unwrap();
        assert!(r.initial_abstracts.is_subset(&r.expanded_abstracts));
        assert!(r.selected_chunks.windows(2).all(|w| w[0].score >= w[1].score));
        for c in &r.selected_chunks {
            assert!(r.candidate_chunks.binary_search(&c.id).is_ok());
        }
        let owners: BTreeSet<PairId> = r.selected_chunks.iter().map(|c| c.id / 5).collect();
        assert_eq!(owners, r.selected_abstracts);
    }
}

#[test]
fn candidates_grow_with_depth() {
    let b = bundle(80, &[(1, 0), (2, 1), (3, 2), (4, 3), (6, 2)], &[("zeta", &[2])]);
    let mut prev: Vec<ChunkId> = Vec::new();
    for d in 1..=3 {
        let r = retrieve_context("zeta", &opts(5, d), &b).unwrap();
        assert!(prev.iter().all(|c| r.candidate_chunks.contains(c)));
        prev = r.candidate_chunks;
    }
}

#[test]
fn repeated_queries_raise_temperature_by_count() {
    let b = bundle(20, &[], &[("zeta", &[1]), ("eta", &[2])]);
    for _ in 0..7 {
        retrieve_context("zeta and zeta again", &opts(3, 1), &b).unwrap();
    }
    assert_eq!(b.filter().temperature("zeta"), Some(7));
    assert_eq!(b.filter().temperature("eta"), Some(0));
    assert_eq!(b.filter().dirty_bucket_count(), 0);
}

#[test]
fn rejects_bad_options() {
    let b = bundle(5, &[], &[]);
    assert!(retrieve_context("x", &opts(0, 1), &b).is_err());
    assert!(retrieve_context("x", &opts(1, 4), &b).is_err());
    assert!(retrieve_context("x", &opts(1, 0), &b).is_err());
}

#[test]
fn prompt_has_four_sections_in_order() {
    let b = bundle(10, &[], &[]);
    let sel = [ScoredChunk { id: 6, score: 0.5 }];
    let p = assemble_prompt("Why?", &sel, &[1].into(), &b.store, &b.forest);
    let want = format!(
        "System: {SYSTEM_LINE}\n\nInformation:\n{}\n\nAbstracts:\n{}\n\nQuestion:\nWhy?\n",
        b.store.text(6),
        b.forest.get(1).unwrap().summary
    );
    assert_eq!(p, want);
    let empty = assemble_prompt("Q", &[], &BTreeSet::new(), &b.store, &b.forest);
    assert_eq!(empty, format!("System: {SYSTEM_LINE}\n\nInformation:\n\nAbstracts:\n\nQuestion:\nQ\n"));
}

#[test]
fn json_shape() {
    let b = bundle(10, &[], &[("zeta", &[0])]);
    let v = retrieve_context("zeta", &opts(2, 1), &b).unwrap().to_json();
    for key in ["query", "fallback", "entities", "initial_abstracts", "expanded_abstracts", "chunks", "prompt", "timing_us"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["chunks"].as_array().unwrap().len(), 2);
    assert!(v["chunks"][0]["id"].is_u64());
}

proptest! {
    #[test]
    fn top_k_maximizes_score_sum(
        raw in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 1..=12),
        q in proptest::collection::vec(-1.0f64..1.0, 3),
        k in 1usize..6,
    ) {
        let mut store = ChunkStore::new(3);
        for v in &raw {
            store.push(String::new(), &EmbeddingVector::normalized(v).unwrap());
        }
        let q = EmbeddingVector::normalized(&q).unwrap();
        let ids: Vec<ChunkId> = (0..raw.len() as ChunkId).collect();
        let got = select_top_k(&ids, &q, k, &store);
        let kk = k.min(ids.len());
        prop_assert_eq!(got.len(), kk);

        let scores: Vec<f64> = ids
            .iter()
            .map(|&i| crate::embed::cosine_similarity(q.as_slice(), store.vector(i)).unwrap())
            .collect();
        // Exhaustive search over all subsets of size kk.
        let mut best = f64::NEG_INFINITY;
        let mut best_sets = Vec::new();
        for mask in 0u32..(1 << ids.len()) {
            if mask.count_ones() as usize != kk {
                continue;
            }
            let sum: f64 = (0..ids.len()).filter(|i| mask >> i & 1 == 1).map(|i| scores[i]).sum();
            if sum > best + 1e-12 {
                best = sum;
                best_sets = vec![mask];
            } else if (sum - best).abs() <= 1e-12 {
                best_sets.push(mask);
            }
        }
        let got_mask: u32 = got.iter().map(|c| 1u32 << c.id).sum();
        prop_assert!(best_sets.contains(&got_mask), "{got_mask:b} not among {best_sets:?}");
        prop_assert!(got.windows(2).all(|w| w[0].score > w[1].score || (w[0].score == w[1].score && w[0].id < w[1].id)));
    }
}
