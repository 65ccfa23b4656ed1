//! Abstracts over five-chunk groups, linked into trees.
//!
//! Abstract `i` owns chunks `5i ..= min(5i + 4, N - 1)`; the last abstract of
//! a corpus whose size is not a multiple of five is shorter. Parent links
//! point from more specific abstracts to more general ones.

mod codec;
mod relations;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::text::lead_sentence;
use crate::{ChunkId, PairId};

pub use codec::FOREST_VERSION;
pub use relations::{filter_relations, RelationEdge, RelationKind};

pub const CHUNKS_PER_ABSTRACT: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ForestError {
    #[error("invalid pair id {0}")]
    InvalidPairId(PairId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Abstract {
    pub pair_id: PairId,
    pub summary: String,
    pub parent: Option<PairId>,
    /// Sorted, unique.
    pub children: Vec<PairId>,
    pub first_chunk: ChunkId,
    pub last_chunk: ChunkId,
}

impl Abstract {
    pub fn chunk_span(&self) -> std::ops::RangeInclusive<ChunkId> {
        self.first_chunk..=self.last_chunk
    }
}

/// Abstract that owns `chunk`.
pub fn owner_of(chunk: ChunkId) -> PairId {
    chunk / CHUNKS_PER_ABSTRACT as u32
}

/// Produces the summary text of an abstract from its constituent chunks.
pub trait Summarizer {
    fn summarize(&self, chunks: &[&str]) -> String;
}

/// Concatenates the first sentence of every chunk.
#[derive(Clone, Copy, Debug, Default)]
pub struct LeadSentences;

impl Summarizer for LeadSentences {
    fn summarize(&self, chunks: &[&str]) -> String {
        chunks
            .iter()
            .map(|c| lead_sentence(c))
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Groups consecutive chunks into `ceil(N / 5)` parentless abstracts.
pub fn build_abstracts<S: AsRef<str>>(chunks: &[S], summarizer: &dyn Summarizer) -> Vec<Abstract> {
    chunks
        .chunks(CHUNKS_PER_ABSTRACT)
        .enumerate()
        .map(|(i, group)| {
            let texts: Vec<&str> = group.iter().map(AsRef::as_ref).collect();
            let first = (i * CHUNKS_PER_ABSTRACT) as ChunkId;
            Abstract {
                pair_id: i as PairId,
                summary: summarizer.summarize(&texts),
                parent: None,
                children: Vec::new(),
                first_chunk: first,
                last_chunk: first + group.len() as ChunkId - 1,
            }
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AssemblyReport {
    pub installed: usize,
    pub skipped_unmapped: usize,
    /// Both concepts map to the same abstract.
    pub skipped_same_abstract: usize,
    /// The abstract-level edge was already installed.
    pub skipped_duplicate: usize,
    pub rejected_cycles: usize,
    /// The child abstract already had a different parent.
    pub rejected_multi_parent: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ForestShape {
    pub node_count: usize,
    pub roots: usize,
    /// Levels on the longest root-to-leaf path; 0 for an empty forest.
    pub max_depth: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Forest {
    abstracts: Vec<Abstract>,
    chunk_count: usize,
}

impl Forest {
    /// Links abstracts along concept edges. Edges are installed in order; an
    /// edge whose child already has a parent, or that would close a cycle,
    /// is rejected and counted.
    pub fn assemble(
        mut abstracts: Vec<Abstract>,
        concept_edges: &[RelationEdge],
        concept_to_abstract: &BTreeMap<String, PairId>,
    ) -> (Forest, AssemblyReport) {
        let mut report = AssemblyReport::default();
        for a in &mut abstracts {
            a.parent = None;
            a.children.clear();
        }
        for edge in concept_edges {
            let (Some(&child), Some(&parent)) = (
                concept_to_abstract.get(&edge.child),
                concept_to_abstract.get(&edge.parent),
            ) else {
                report.skipped_unmapped += 1;
                continue;
            };
            if child as usize >= abstracts.len() || parent as usize >= abstracts.len() {
                report.skipped_unmapped += 1;
                continue;
            }
            if child == parent {
                report.skipped_same_abstract += 1;
                continue;
            }
            match abstracts[child as usize].parent {
                Some(p) if p == parent => {
                    report.skipped_duplicate += 1;
                    continue;
                }
                Some(_) => {
                    report.rejected_multi_parent += 1;
                    continue;
                }
                None => {}
            }
            if is_ancestor_or_self(&abstracts, child, parent) {
                report.rejected_cycles += 1;
                continue;
            }
            abstracts[child as usize].parent = Some(parent);
            abstracts[parent as usize].children.push(child);
            report.installed += 1;
        }
        for a in &mut abstracts {
            a.children.sort_unstable();
        }
        let chunk_count = abstracts.last().map_or(0, |a| a.last_chunk as usize + 1);
        (
            Forest {
                abstracts,
                chunk_count,
            },
            report,
        )
    }

    pub fn len(&self) -> usize {
        self.abstracts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abstracts.is_empty()
    }

    pub fn chunk_count(&self) -> usize {
        self.chunk_count
    }

    pub fn abstracts(&self) -> &[Abstract] {
        &self.abstracts
    }

    pub fn get(&self, id: PairId) -> Option<&Abstract> {
        self.abstracts.get(id as usize)
    }

    fn checked(&self, id: PairId) -> Result<&Abstract, ForestError> {
        self.get(id).ok_or(ForestError::InvalidPairId(id))
    }

    pub fn roots(&self) -> impl Iterator<Item = PairId> + '_ {
        self.abstracts
            .iter()
            .filter(|a| a.parent.is_none())
            .map(|a| a.pair_id)
    }

    /// `initial` plus every ancestor up to `depth` links above and every
    /// descendant up to `depth` levels below each member.
    pub fn expand_hierarchy(
        &self,
        initial: &BTreeSet<PairId>,
        depth: usize,
    ) -> Result<BTreeSet<PairId>, ForestError> {
        let mut out = initial.clone();
        for &a in initial {
            self.checked(a)?;
            if depth == 0 {
                continue;
            }
            let mut cur = a;
            for _ in 0..depth {
                match self.abstracts[cur as usize].parent {
                    Some(p) => {
                        out.insert(p);
                        cur = p;
                    }
                    None => break,
                }
            }
            let mut frontier = vec![a];
            for _ in 0..depth {
                let mut next = Vec::new();
                for n in frontier {
                    next.extend_from_slice(&self.abstracts[n as usize].children);
                }
                if next.is_empty() {
                    break;
                }
                out.extend(next.iter().copied());
                frontier = next;
            }
        }
        Ok(out)
    }

    /// Union of the chunk spans of `set`, ascending.
    pub fn chunks_of(&self, set: &BTreeSet<PairId>) -> Result<Vec<ChunkId>, ForestError> {
        let mut out = Vec::new();
        for &a in set {
            out.extend(self.checked(a)?.chunk_span());
        }
        Ok(out)
    }

    pub fn shape(&self) -> ForestShape {
        let mut max_depth = 0;
        let mut queue: VecDeque<(PairId, usize)> = self.roots().map(|r| (r, 1)).collect();
        while let Some((n, d)) = queue.pop_front() {
            max_depth = max_depth.max(d);
            for &c in &self.abstracts[n as usize].children {
                queue.push_back((c, d + 1));
            }
        }
        ForestShape {
            node_count: self.abstracts.len(),
            roots: self.roots().count(),
            max_depth,
        }
    }
}

/// True when `node` is `start` or one of its ancestors.
fn is_ancestor_or_self(abstracts: &[Abstract], node: PairId, start: PairId) -> bool {
    let mut cur = Some(start);
    let mut steps = 0;
    while let Some(c) = cur {
        if c == node {
            return true;
        }
        steps += 1;
        if steps > abstracts.len() {
            return true;
        }
        cur = abstracts[c as usize].parent;
    }
    false
}

#[cfg(test)]
mod tests;
