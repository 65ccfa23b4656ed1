use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use proptest::prelude::*;

use super::*;

fn blank_abstracts(chunks: usize) -> Vec<Abstract> {
    let texts: Vec<String> = (0..chunks).map(|i| format!("Chunk {i}.")).collect();
    build_abstracts(&texts, &LeadSentences)
}

fn edge(child: &str, parent: &str) -> RelationEdge {
    RelationEdge::new(child, parent, RelationKind::BelongsTo)
}

fn pairs(edges: &[RelationEdge]) -> Vec<(&str, &str)> {
    edges.iter().map(|e| (e.child.as_str(), e.parent.as_str())).collect()
}

/// Forest with abstract `i` linked under `parents[i]`.
fn forest_from_parents(parents: &[Option<PairId>]) -> Forest {
    let abstracts = blank_abstracts(parents.len() * CHUNKS_PER_ABSTRACT);
    let map: BTreeMap<String, PairId> = (0..parents.len() as PairId).map(|i| (format!("c{i}"), i)).collect();
    let edges: Vec<RelationEdge> = parents
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.map(|p| edge(&format!("c{i}"), &format!("c{p}"))))
        .collect();
    let (forest, report) = Forest::assemble(abstracts, &edges, &map);
    assert_eq!(report.installed, edges.len());
    forest
}

#[test]
fn twelve_chunks_give_three_abstracts_with_clamped_tail() {
    let a = blank_abstracts(12);
    let spans: Vec<_> = a.iter().map(|a| (a.first_chunk, a.last_chunk)).collect();
    assert_eq!(spans, vec![(0, 4), (5, 9), (10, 11)]);
}

#[test]
fn five_chunks_give_one_abstract() {
    let a = blank_abstracts(5);
    assert_eq!(a.len(), 1);
    assert_eq!(a[0].chunk_span(), 0..=4);
    assert!(blank_abstracts(0).is_empty());
}

#[test]
fn pair_id_seven_owns_chunks_35_to_39() {
    let a = blank_abstracts(50);
    assert_eq!(a[7].chunk_span(), 35..=39);
    assert_eq!(owner_of(37), 7);
}

#[test]
fn lead_sentence_summary() {
    let chunks = ["Alpha is first. More text.", "Beta follows! Tail.", ""];
    assert_eq!(LeadSentences.summarize(&chunks), "Alpha is first. Beta follows!");
}

#[test]
fn spans_partition_chunk_range() {
    for n in 0..40usize {
        let covered: Vec<ChunkId> = blank_abstracts(n).iter().flat_map(|a| a.chunk_span()).collect();
        assert_eq!(covered, (0..n as ChunkId).collect::<Vec<_>>());
    }
}

#[test]
fn filter_drops_transitive_edge() {
    let out = filter_relations(&[edge("a", "b"), edge("b", "c"), edge("a", "c")]);
    assert_eq!(pairs(&out), vec![("a", "b"), ("b", "c")]);
}

#[test]
fn filter_drops_self_edge() {
    assert!(filter_relations(&[edge("a", "a")]).is_empty());
}

#[test]
fn filter_keeps_one_duplicate() {
    let out = filter_relations(&[edge("a", "b"), edge("a", "b")]);
    assert_eq!(pairs(&out), vec![("a", "b")]);
}

#[test]
fn filter_two_cycle_prefers_confidence_then_order() {
    let weak = RelationEdge::new("a", "b", RelationKind::Modifier);
    let strong = edge("b", "a");
    assert_eq!(pairs(&filter_relations(&[weak.clone(), strong.clone()])), vec![("b", "a")]);
    assert_eq!(pairs(&filter_relations(&[edge("a", "b"), edge("b", "a")])), vec![("a", "b")]);
}

#[test]
fn filter_breaks_long_cycle_at_latest_edge() {
    let out = filter_relations(&[edge("a", "b"), edge("b", "c"), edge("c", "a")]);
    assert_eq!(pairs(&out), vec![("a", "b"), ("b", "c")]);
}

#[test]
fn filter_single_parent_prefers_confidence() {
    let out = filter_relations(&[
        RelationEdge::new("x", "p", RelationKind::Modifier),
        edge("x", "q"),
    ]);
    assert_eq!(pairs(&out), vec![("x", "q")]);
}

#[test]
fn assemble_without_edges_gives_singleton_roots() {
    let (forest, report) = Forest::assemble(blank_abstracts(25), &[], &BTreeMap::new());
    assert_eq!(forest.roots().count(), 5);
    assert_eq!(report, AssemblyReport::default());
    assert_eq!(forest.shape().max_depth, 1);
}

#[test]
fn assemble_chain_has_depth_three() {
    let map: BTreeMap<String, PairId> = [("x", 0), ("y", 1), ("z", 2)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let (forest, report) = Forest::assemble(blank_abstracts(15), &[edge("x", "y"), edge("y", "z")], &map);
    assert_eq!(report.installed, 2);
    assert_eq!(forest.shape(), ForestShape { node_count: 3, roots: 1, max_depth: 3 });
    assert_eq!(forest.get(1).unwrap().children, vec![0]);
}

#[test]
fn assemble_rejects_cycle_and_counts_skips() {
    let map: BTreeMap<String, PairId> = [("x", 0), ("y", 1), ("z", 2), ("w", 0)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let edges = [
        edge("x", "y"),
        edge("y", "z"),
        edge("z", "w"),
        edge("x", "w"),
        edge("nowhere", "x"),
        edge("w", "y"),
    ];
    let (forest, report) = Forest::assemble(blank_abstracts(15), &edges, &map);
    assert_eq!(report.installed, 2);
    assert_eq!(report.rejected_cycles, 1);
    assert_eq!(report.skipped_same_abstract, 1);
    assert_eq!(report.skipped_unmapped, 1);
    assert_eq!(report.skipped_duplicate, 1);
    assert_eq!(forest.get(2).unwrap().parent, None);
}

#[test]
fn assemble_rejects_second_parent() {
    let map: BTreeMap<String, PairId> = [("x", 0), ("y", 1), ("z", 2)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let (_, report) = Forest::assemble(blank_abstracts(15), &[edge("x", "y"), edge("x", "z")], &map);
    assert_eq!(report.installed, 1);
    assert_eq!(report.rejected_multi_parent, 1);
}

#[test]
fn expand_depth_zero_is_identity() {
    let f = forest_from_parents(&[None, Some(0), Some(1)]);
    let s: BTreeSet<PairId> = [1].into();
    assert_eq!(f.expand_hierarchy(&s, 0).unwrap(), s);
}

#[test]
fn expand_depth_one_on_path() {
    let f = forest_from_parents(&[None, Some(0), Some(1)]);
    let out = f.expand_hierarchy(&[1].into(), 1).unwrap();
    assert_eq!(out, [0, 1, 2].into());
}

#[test]
fn expand_rejects_unknown_id() {
    let f = forest_from_parents(&[None]);
    assert_eq!(f.expand_hierarchy(&[3].into(), 1), Err(ForestError::InvalidPairId(3)));
}

#[test]
fn chunks_of_examples() {
    let f = Forest::assemble(blank_abstracts(15), &[], &BTreeMap::new()).0;
    let c = f.chunks_of(&[0, 2].into()).unwrap();
    assert_eq!(c, vec![0, 1, 2, 3, 4, 10, 11, 12, 13, 14]);
    assert!(f.chunks_of(&BTreeSet::new()).unwrap().is_empty());
    let tail = Forest::assemble(blank_abstracts(12), &[], &BTreeMap::new()).0;
    assert_eq!(tail.chunks_of(&[2].into()).unwrap(), vec![10, 11]);
}

#[test]
fn segment_roundtrip_and_rejections() {
    let f = forest_from_parents(&[None, Some(0), Some(0), Some(2)]);
    let mut bytes = Vec::new();
    f.encode_segment(&mut bytes);
    let back = Forest::decode_segment(&bytes).unwrap();
    assert_eq!(back, f);

    assert!(Forest::decode_segment(&bytes[..bytes.len() - 1]).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(Forest::decode_segment(&extra).is_err());

    // Make abstract 0 point at 3, closing a cycle.
    let mut cyclic = Forest {
        abstracts: f.abstracts.clone(),
        chunk_count: f.chunk_count,
    };
    cyclic.abstracts[0].parent = Some(3);
    cyclic.abstracts[3].children = vec![0];
    let mut bad = Vec::new();
    cyclic.encode_segment(&mut bad);
    assert!(Forest::decode_segment(&bad).is_err());

    let mut inconsistent = Forest {
        abstracts: f.abstracts.clone(),
        chunk_count: f.chunk_count,
    };
    inconsistent.abstracts[0].children = vec![1];
    let mut bad = Vec::new();
    inconsistent.encode_segment(&mut bad);
    assert!(Forest::decode_segment(&bad).is_err());
}

/// Depth-bounded BFS over the undirected parent/child graph, restricted to
/// nodes reachable by moving only up or only down.
fn bfs_oracle(parents: &[Option<PairId>], initial: &BTreeSet<PairId>, d: usize) -> BTreeSet<PairId> {
    let mut children: Vec<Vec<PairId>> = vec![Vec::new(); parents.len()];
    for (i, p) in parents.iter().enumerate() {
        if let Some(p) = p {
            children[*p as usize].push(i as PairId);
        }
    }
    let mut out = initial.clone();
    for &s in initial {
        for up in [true, false] {
            let mut q = VecDeque::from([(s, 0usize)]);
            let mut seen = HashSet::from([s]);
            while let Some((n, dist)) = q.pop_front() {
                out.insert(n);
                if dist == d {
                    continue;
                }
                let next: Vec<PairId> = if up {
                    parents[n as usize].into_iter().collect()
                } else {
                    children[n as usize].clone()
                };
                for m in next {
                    if seen.insert(m) {
                        q.push_back((m, dist + 1));
                    }
                }
            }
        }
    }
    out
}

fn random_parents() -> impl Strategy<Value = Vec<Option<PairId>>> {
    (1usize..40).prop_flat_map(|n| {
        proptest::collection::vec(any::<proptest::sample::Index>(), n).prop_map(|picks| {
            picks
                .iter()
                .enumerate()
                .map(|(i, pick)| {
                    // Parent has a lower id, so the result is a forest.
                    if i == 0 || pick.index(4) == 0 {
                        None
                    } else {
                        Some(pick.index(i) as PairId)
                    }
                })
                .collect()
        })
    })
}

/// Keeps `u -> v` only if no other path from `u` to `v` exists.
fn brute_reduction(edges: &[(u8, u8)]) -> HashSet<(u8, u8)> {
    let set: HashSet<(u8, u8)> = edges.iter().copied().collect();
    set.iter()
        .copied()
        .filter(|&(u, v)| {
            let mut stack = vec![u];
            let mut seen = HashSet::from([u]);
            while let Some(n) = stack.pop() {
                for &(a, b) in &set {
                    if a == n && (a, b) != (u, v) && seen.insert(b) {
                        stack.push(b);
                    }
                }
            }
            !seen.contains(&v)
        })
        .collect()
}

proptest! {
    #[test]
    fn expand_matches_bfs(parents in random_parents(), picks in proptest::collection::vec(any::<proptest::sample::Index>(), 1..4), d in 0usize..4) {
        let f = forest_from_parents(&parents);
        let initial: BTreeSet<PairId> = picks.iter().map(|p| p.index(parents.len()) as PairId).collect();
        let got = f.expand_hierarchy(&initial, d).unwrap();
        prop_assert_eq!(&got, &bfs_oracle(&parents, &initial, d));
        let wider = f.expand_hierarchy(&initial, d + 1).unwrap();
        prop_assert!(got.is_subset(&wider));
    }

    #[test]
    fn filter_on_dag_equals_brute_reduction(raw in proptest::collection::vec((0u8..10, 0u8..10), 0..30)) {
        // Orient every edge low -> high so the input is a DAG; keep a
        // single parent only where the reduction already has one.
        let dag: Vec<(u8, u8)> = raw.iter().filter(|(a, b)| a != b).map(|&(a, b)| (a.min(b), a.max(b))).collect();
        let edges: Vec<RelationEdge> = dag.iter().map(|(a, b)| edge(&a.to_string(), &b.to_string())).collect();
        let out = filter_relations(&edges);
        let got: HashSet<(u8, u8)> = out.iter().map(|e| (e.child.parse().unwrap(), e.parent.parse().unwrap())).collect();
        let reduced = brute_reduction(&dag);
        prop_assert!(got.is_subset(&reduced));
        let mut kids: Vec<u8> = reduced.iter().map(|e| e.0).collect();
        kids.sort_unstable();
        kids.dedup();
        prop_assert_eq!(got.len(), kids.len());
        prop_assert_eq!(filter_relations(&out), out);
    }
}
