use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    BelongsTo,
    Contains,
    DependsOn,
    Modifier,
}

impl RelationKind {
    pub const ALL: [RelationKind; 4] = [
        RelationKind::BelongsTo,
        RelationKind::Contains,
        RelationKind::DependsOn,
        RelationKind::Modifier,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::BelongsTo => "belongs_to",
            RelationKind::Contains => "contains",
            RelationKind::DependsOn => "depends_on",
            RelationKind::Modifier => "modifier",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Explicit verb patterns outrank noun modifiers.
    pub fn default_confidence(self) -> u8 {
        match self {
            RelationKind::Modifier => 1,
            _ => 2,
        }
    }
}

/// `child` is the more specific concept, `parent` the more general one.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationEdge {
    pub child: String,
    pub parent: String,
    pub kind: RelationKind,
    pub confidence: u8,
}

impl RelationEdge {
    pub fn new(child: impl Into<String>, parent: impl Into<String>, kind: RelationKind) -> Self {
        RelationEdge {
            child: child.into(),
            parent: parent.into(),
            kind,
            confidence: kind.default_confidence(),
        }
    }
}

#[derive(Clone, Copy)]
struct Cand {
    pos: usize,
    child: usize,
    parent: usize,
    confidence: u8,
}

impl Cand {
    /// Higher confidence wins; equal confidence keeps the earlier edge.
    fn beats(&self, other: &Cand) -> bool {
        self.confidence > other.confidence
            || (self.confidence == other.confidence && self.pos < other.pos)
    }
}

/// Cleans a raw concept-edge list into a forest of single-parent links.
///
/// In order: self-edges and duplicate pairs are dropped (the best instance
/// survives), each 2-cycle keeps its stronger edge, longer cycles lose
/// whichever edge comes last in input order, the surviving DAG is
/// transitively reduced, and every child keeps only its strongest parent.
/// Ties on confidence go to the earlier edge. Output keeps input order.
pub fn filter_relations(edges: &[RelationEdge]) -> Vec<RelationEdge> {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut best: HashMap<(usize, usize), Cand> = HashMap::new();
    for (pos, e) in edges.iter().enumerate() {
        if e.child == e.parent {
            continue;
        }
        let n = ids.len();
        let child = *ids.entry(e.child.as_str()).or_insert(n);
        let n = ids.len();
        let parent = *ids.entry(e.parent.as_str()).or_insert(n);
        let cand = Cand {
            pos,
            child,
            parent,
            confidence: e.confidence,
        };
        best.entry((child, parent))
            .and_modify(|c| {
                if cand.beats(c) {
                    *c = cand;
                }
            })
            .or_insert(cand);
    }

    let mut kept: Vec<Cand> = best
        .values()
        .filter(|c| match best.get(&(c.parent, c.child)) {
            Some(rev) => c.beats(rev),
            None => true,
        })
        .copied()
        .collect();
    kept.sort_unstable_by_key(|c| c.pos);

    let node_count = ids.len();
    let mut out_adj: Vec<Vec<usize>> = vec![Vec::new(); node_count];
    let mut accepted = Vec::with_capacity(kept.len());
    let mut seen = vec![u32::MAX; node_count];
    let mut stack = Vec::new();
    for (stamp, c) in kept.into_iter().enumerate() {
        if reaches(&out_adj, c.parent, c.child, stamp as u32, &mut seen, &mut stack) {
            continue;
        }
        out_adj[c.child].push(c.parent);
        accepted.push(c);
    }

    let reduced = transitive_reduction(accepted, node_count);

    let mut parent_of: HashMap<usize, Cand> = HashMap::new();
    for c in reduced {
        parent_of
            .entry(c.child)
            .and_modify(|cur| {
                if c.beats(cur) {
                    *cur = c;
                }
            })
            .or_insert(c);
    }
    let mut survivors: Vec<usize> = parent_of.values().map(|c| c.pos).collect();
    survivors.sort_unstable();
    survivors.into_iter().map(|p| edges[p].clone()).collect()
}

/// Depth-first reachability from `from` to `to` along `adj`.
fn reaches(
    adj: &[Vec<usize>],
    from: usize,
    to: usize,
    stamp: u32,
    seen: &mut [u32],
    stack: &mut Vec<usize>,
) -> bool {
    stack.clear();
    stack.push(from);
    seen[from] = stamp;
    while let Some(n) = stack.pop() {
        if n == to {
            return true;
        }
        for &m in &adj[n] {
            if seen[m] != stamp {
                seen[m] = stamp;
                stack.push(m);
            }
        }
    }
    false
}

/// Drops every edge `u -> v` for which another path `u -> w -> ... -> v`
/// exists. Input must be acyclic.
fn transitive_reduction(edges: Vec<Cand>, node_count: usize) -> Vec<Cand> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); node_count];
    for c in &edges {
        adj[c.child].push(c.parent);
    }
    let mut seen = vec![u32::MAX; node_count];
    let mut stamp = 0u32;
    let mut implied: Vec<Vec<usize>> = vec![Vec::new(); node_count];
    let mut stack = Vec::new();
    for u in 0..node_count {
        if adj[u].len() < 2 {
            continue;
        }
        stamp += 1;
        stack.clear();
        for &w in &adj[u] {
            for &x in &adj[w] {
                if seen[x] != stamp {
                    seen[x] = stamp;
                    stack.push(x);
                }
            }
        }
        while let Some(n) = stack.pop() {
            for &m in &adj[n] {
                if seen[m] != stamp {
                    seen[m] = stamp;
                    stack.push(m);
                }
            }
        }
        implied[u] = adj[u].iter().copied().filter(|&v| seen[v] == stamp).collect();
    }
    edges
        .into_iter()
        .filter(|c| !implied[c.child].contains(&c.parent))
        .collect()
}
