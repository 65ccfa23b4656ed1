//! Deterministic synthetic corpora with planted entities and a planted
//! abstract-level forest.
//!
//! Every abstract gets a unique primary entity mentioned once per chunk, and
//! chunks also mention a few other primaries at random. A planted parent
//! link `a -> b` is written as "The <primary a> belongs to the <primary b>"
//! inside abstract `a`, so relation extraction recovers it and concept
//! mapping places it on the right abstracts.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::forest::CHUNKS_PER_ABSTRACT;
use crate::ingest::CorpusDocument;
use crate::PairId;

/// Every generated sentence has exactly this many whitespace tokens.
pub const SENTENCE_TOKENS: usize = 16;

const SYLLABLES: &[&str] = &[
    "ba", "ko", "ri", "zu", "mel", "tan", "vo", "qi", "dor", "sul", "pax", "ny", "gre", "fo",
    "lum", "hek",
];

const FILLERS: &[&str] = &[
    "the", "study", "reports", "that", "levels", "of", "were", "measured", "in", "samples",
    "with", "careful", "analysis", "and", "results", "show", "a", "notable", "change", "during",
    "observed", "period", "under", "standard", "conditions", "across", "several", "trials",
];

#[derive(Clone, Debug)]
pub struct SynthSpec {
    pub abstracts: usize,
    /// Tokens per chunk; must be a multiple of [`SENTENCE_TOKENS`].
    pub chunk_len: usize,
    /// Extra primaries mentioned in each chunk.
    pub mentions_per_chunk: usize,
    /// Chance that an abstract gets a parent.
    pub parent_prob: f64,
    /// Levels allowed in a planted tree, root included.
    pub max_tree_levels: usize,
    pub max_children: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            abstracts: 200,
            chunk_len: 128,
            mentions_per_chunk: 2,
            parent_prob: 0.6,
            max_tree_levels: 3,
            max_children: 3,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub docs: Vec<CorpusDocument>,
    /// Primary entity of each abstract, indexed by pair id.
    pub primaries: Vec<String>,
    /// Planted parent of each abstract.
    pub parents: Vec<Option<PairId>>,
}

impl SynthCorpus {
    pub fn chunk_count(&self) -> usize {
        self.primaries.len() * CHUNKS_PER_ABSTRACT
    }

    /// Entity-rich queries, each naming one or two primaries drawn uniformly.
    pub fn queries(&self, n: usize, seed: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let a = self.primaries.choose(&mut rng).expect("corpus has abstracts");
                if rng.random_bool(0.5) {
                    let b = self.primaries.choose(&mut rng).expect("corpus has abstracts");
                    format!("How does {a} relate to {b}?")
                } else {
                    format!("What is known about {a}?")
                }
            })
            .collect()
    }

    /// Single-entity queries whose entity ranks follow Zipf(`s`).
    pub fn zipf_queries(&self, n: usize, s: f64, seed: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zipf = Zipf::new(self.primaries.len() as f64, s).expect("valid Zipf parameters");
        (0..n)
            .map(|_| {
                let rank = zipf.sample(&mut rng) as usize - 1;
                format!("What is known about {}?", self.primaries[rank])
            })
            .collect()
    }
}

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(3..=5);
    (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
}

/// A sentence of exactly [`SENTENCE_TOKENS`] tokens around `core`.
fn sentence(rng: &mut ChaCha8Rng, core: &str) -> String {
    let mut words: Vec<&str> = core.split(' ').filter(|w| !w.is_empty()).collect();
    let lead = rng.random_range(0..=SENTENCE_TOKENS.saturating_sub(words.len()).min(4));
    let mut out: Vec<&str> = (0..lead).map(|_| *FILLERS.choose(rng).unwrap()).collect();
    out.append(&mut words);
    while out.len() < SENTENCE_TOKENS {
        out.push(FILLERS.choose(rng).unwrap());
    }
    let mut s = out.join(" ");
    s.push('.');
    s
}

pub fn generate(spec: &SynthSpec) -> SynthCorpus {
    assert!(spec.chunk_len % SENTENCE_TOKENS == 0 && spec.chunk_len >= SENTENCE_TOKENS);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut seen: HashSet<String> = FILLERS.iter().map(|s| s.to_string()).collect();
    let mut primaries = Vec::with_capacity(spec.abstracts);
    while primaries.len() < spec.abstracts {
        let w = if rng.random_bool(0.2) {
            let (a, b) = (pseudo_word(&mut rng), pseudo_word(&mut rng));
            if seen.contains(&a) || seen.contains(&b) || a == b {
                continue;
            }
            seen.insert(a.clone());
            seen.insert(b.clone());
            format!("{a} {b}")
        } else {
            pseudo_word(&mut rng)
        };
        if seen.insert(w.clone()) {
            primaries.push(w);
        }
    }

    let mut parents: Vec<Option<PairId>> = vec![None; spec.abstracts];
    let mut level = vec![1usize; spec.abstracts];
    let mut children = vec![0usize; spec.abstracts];
    for a in 1..spec.abstracts {
        if !rng.random_bool(spec.parent_prob) {
            continue;
        }
        let lo = a.saturating_sub(32);
        let p = rng.random_range(lo..a);
        if level[p] < spec.max_tree_levels && children[p] < spec.max_children {
            parents[a] = Some(p as PairId);
            level[a] = level[p] + 1;
            children[p] += 1;
        }
    }

    let sentences_per_chunk = spec.chunk_len / SENTENCE_TOKENS;
    let mut docs = Vec::with_capacity(spec.abstracts);
    for a in 0..spec.abstracts {
        let mut text = Vec::with_capacity(CHUNKS_PER_ABSTRACT * sentences_per_chunk);
        for c in 0..CHUNKS_PER_ABSTRACT {
            let mut cores: Vec<String> = vec![format!("the {}", primaries[a])];
            if c == 0 {
                if let Some(p) = parents[a] {
                    cores.push(format!("the {} belongs to the {}", primaries[a], primaries[p as usize]));
                }
            }
            for _ in 0..spec.mentions_per_chunk {
                cores.push(format!("about {}", primaries.choose(&mut rng).unwrap()));
            }
            cores.truncate(sentences_per_chunk);
            while cores.len() < sentences_per_chunk {
                cores.push(String::new());
            }
            for core in cores {
                text.push(sentence(&mut rng, &core));
            }
        }
        docs.push(CorpusDocument {
            doc_id: format!("synth-{a}"),
            text: text.join(" "),
        });
    }
    SynthCorpus {
        docs,
        primaries,
        parents,
    }
}
