//! Query-time path: recognize entities, look up their abstracts, widen the
//! set along the forest, rank the chunks underneath, and build the prompt.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{validate_depth, Config};
use crate::embed::{cosine_with_norms, EmbedError, EmbeddingVector};
use crate::forest::{owner_of, Forest, ForestError};
use crate::ingest::{EntityDictionary, IndexBundle};
use crate::store::ChunkStore;
use crate::{ChunkId, PairId};

pub const SYSTEM_LINE: &str = "Answer the question using the provided information.";

#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetrieveOptions {
    pub k: usize,
    pub max_depth: usize,
    /// Reorder touched buckets by temperature once the query is done.
    pub resort: bool,
}

impl RetrieveOptions {
    pub fn from_config(cfg: &Config) -> Self {
        RetrieveOptions {
            k: cfg.k,
            max_depth: cfg.max_depth,
            resort: true,
        }
    }

    pub fn validate(&self) -> Result<(), RetrieveError> {
        if self.k == 0 {
            return Err(RetrieveError::InvalidArgument("k must be at least 1".into()));
        }
        validate_depth(self.max_depth).map_err(|e| RetrieveError::InvalidArgument(e.to_string()))
    }
}

impl Default for RetrieveOptions {
    fn default() -> Self {
        Self::from_config(&Config::default())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScoredChunk {
    pub id: ChunkId,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Timing {
    pub embed: Duration,
    pub recognize: Duration,
    pub lookup: Duration,
    pub expand: Duration,
    pub select: Duration,
    pub total: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContextResult {
    pub query: String,
    pub fallback: bool,
    pub matched_entities: Vec<String>,
    pub initial_abstracts: BTreeSet<PairId>,
    pub expanded_abstracts: BTreeSet<PairId>,
    /// Ascending.
    pub candidate_chunks: Vec<ChunkId>,
    /// Score descending, ties by lower id.
    pub selected_chunks: Vec<ScoredChunk>,
    pub selected_abstracts: BTreeSet<PairId>,
    pub prompt: String,
    pub timing: Timing,
    /// Fingerprint comparisons spent on filter lookups.
    pub probes: u32,
}

fn micros(d: Duration) -> u64 {
    d.as_micros() as u64
}

impl ContextResult {
    pub fn to_json(&self) -> Value {
        let t = &self.timing;
        json!({
            "query": self.query,
            "fallback": self.fallback,
            "entities": self.matched_entities,
            "initial_abstracts": self.initial_abstracts,
            "expanded_abstracts": self.expanded_abstracts,
            "candidate_count": self.candidate_chunks.len(),
            "chunks": self.selected_chunks,
            "selected_abstracts": self.selected_abstracts,
            "prompt": self.prompt,
            "timing_us": {
                "embed": micros(t.embed),
                "recognize": micros(t.recognize),
                "lookup": micros(t.lookup),
                "expand": micros(t.expand),
                "select": micros(t.select),
                "total": micros(t.total),
            },
        })
    }
}

/// Longest-match, non-overlapping dictionary entities of `query`, left to
/// right, each reported once.
pub fn recognize_query_entities(query: &str, dict: &EntityDictionary) -> Vec<String> {
    dict.recognize(query)
}

/// Best `k` candidates by cosine with `q`: score descending, ties by lower id.
pub fn select_top_k(
    candidates: &[ChunkId],
    q: &EmbeddingVector,
    k: usize,
    store: &ChunkStore,
) -> Vec<ScoredChunk> {
    if k == 0 || candidates.is_empty() {
        return Vec::new();
    }
    let qv = q.as_slice();
    let qn = q.norm();
    let mut scored: Vec<ScoredChunk> = candidates
        .iter()
        .map(|&id| ScoredChunk {
            id,
            score: cosine_with_norms(qv, qn, store.vector(id), store.norm(id)),
        })
        .collect();
    let order = |a: &ScoredChunk, b: &ScoredChunk| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id));
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(order);
    scored
}

/// System line, selected chunks in rank order, summaries of their abstracts
/// in id order, then the question. Sections are separated by blank lines.
pub fn assemble_prompt(
    query: &str,
    selected: &[ScoredChunk],
    selected_abstracts: &BTreeSet<PairId>,
    store: &ChunkStore,
    forest: &Forest,
) -> String {
    let mut info = String::from("Information:");
    for c in selected {
        info.push('\n');
        info.push_str(store.text(c.id));
    }
    let mut abs = String::from("Abstracts:");
    for &a in selected_abstracts {
        if let Some(a) = forest.get(a) {
            abs.push('\n');
            abs.push_str(&a.summary);
        }
    }
    format!("System: {SYSTEM_LINE}\n\n{info}\n\n{abs}\n\nQuestion:\n{query}\n")
}

/// Runs the full query path against `bundle`. When no entity resolves to an
/// abstract, every chunk becomes a candidate and `fallback` is set.
pub fn retrieve_context(
    query: &str,
    opts: &RetrieveOptions,
    bundle: &IndexBundle,
) -> Result<ContextResult, RetrieveError> {
    opts.validate()?;
    let start = Instant::now();
    let mut timing = Timing::default();

    let q = bundle.embedder().embed(query)?;
    let t = Instant::now();
    timing.embed = t - start;

    let entities = recognize_query_entities(query, &bundle.dictionary);
    let t2 = Instant::now();
    timing.recognize = t2 - t;

    let mut initial = BTreeSet::new();
    let mut matched = Vec::new();
    let mut probes = 0;
    {
        let filter = bundle.filter();
        for e in &entities {
            let (ids, p) = filter.find_with_probes(e);
            probes += p;
            if let Some(ids) = ids {
                initial.extend(ids.iter());
                filter.increment_temperature(e);
                matched.push(e.clone());
            }
        }
    }
    let t3 = Instant::now();
    timing.lookup = t3 - t2;

    let fallback = initial.is_empty();
    let (expanded, candidates) = if fallback {
        (BTreeSet::new(), (0..bundle.store.len() as ChunkId).collect())
    } else {
        let expanded = bundle.forest.expand_hierarchy(&initial, opts.max_depth)?;
        let candidates = bundle.forest.chunks_of(&expanded)?;
        (expanded, candidates)
    };
    let t4 = Instant::now();
    timing.expand = t4 - t3;

    let selected = select_top_k(&candidates, &q, opts.k, &bundle.store);
    let selected_abstracts: BTreeSet<PairId> = selected.iter().map(|c| owner_of(c.id)).collect();
    let prompt = assemble_prompt(query, &selected, &selected_abstracts, &bundle.store, &bundle.forest);
    let t5 = Instant::now();
    timing.select = t5 - t4;

    if opts.resort && !matched.is_empty() {
        let mut filter = bundle.filter_mut();
        if filter.dirty_bucket_count() > 0 {
            filter.resort_dirty_buckets();
        }
    }
    timing.total = start.elapsed();

    Ok(ContextResult {
        query: query.to_string(),
        fallback,
        matched_entities: matched,
        initial_abstracts: initial,
        expanded_abstracts: expanded,
        candidate_chunks: candidates,
        selected_chunks: selected,
        selected_abstracts,
        prompt,
        timing,
        probes,
    })
}

#[cfg(test)]
mod tests;
