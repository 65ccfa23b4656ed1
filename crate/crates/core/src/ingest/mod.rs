//! Corpus to index: chunking, concept and relation extraction, forest
//! assembly and filter population.

mod chunker;
mod entities;
mod input;
mod relations;

use std::collections::{BTreeMap, HashSet};
use std::sync::{RwLock, RwLockReadGuard, RwLockWriteGuard};

use serde::Serialize;
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::cuckoo::{CuckooIndex, FilterError, FilterStats, InsertOutcome};
use crate::embed::{EmbedError, Embedder, HashingEmbedder};
use crate::forest::{
    build_abstracts, filter_relations, owner_of, AssemblyReport, Forest, ForestShape, LeadSentences,
    RelationEdge, Summarizer,
};
use crate::store::ChunkStore;
use crate::text::canonical_tokens;
use crate::{ChunkId, PairId};

pub use chunker::chunk_document;
pub use entities::{default_stoplist, extract_entities, EntityDictionary};
pub use input::{parse_corpus_jsonl, parse_entities_jsonl, parse_relations_tsv, CorpusDocument, InputError};
pub use relations::extract_relations;

const EMBED_BATCH: usize = 256;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("embedding failed: {0}")]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("filter could not place entity {entity:?} even after resizing to {bucket_count} buckets")]
    Capacity { entity: String, bucket_count: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct BuildReport {
    pub documents: usize,
    pub chunks: usize,
    pub abstracts: usize,
    pub entities: usize,
    /// Entities with at least one occurrence, hence present in the filter.
    pub entities_indexed: usize,
    /// Distinct (entity, abstract) pairs inserted.
    pub mappings: usize,
    pub relations_extracted: usize,
    pub relations_kept: usize,
    pub assembly: AssemblyReport,
    pub forest: ForestShape,
    pub filter: FilterStats,
    /// Highest load factor seen while the table still had its initial size.
    pub peak_load_before_resize: f64,
}

/// Everything a query needs. The filter sits behind a lock so queries can
/// share it while the end-of-query resort takes brief exclusive access.
pub struct IndexBundle {
    pub config: Config,
    pub store: ChunkStore,
    pub forest: Forest,
    pub dictionary: EntityDictionary,
    filter: RwLock<CuckooIndex>,
    embedder: Box<dyn Embedder>,
}

impl std::fmt::Debug for IndexBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IndexBundle")
            .field("config", &self.config)
            .field("chunks", &self.store.len())
            .field("abstracts", &self.forest.len())
            .field("entities", &self.dictionary.len())
            .finish()
    }
}

impl IndexBundle {
    pub fn new(
        config: Config,
        store: ChunkStore,
        forest: Forest,
        dictionary: EntityDictionary,
        filter: CuckooIndex,
        embedder: Box<dyn Embedder>,
    ) -> Self {
        IndexBundle {
            config,
            store,
            forest,
            dictionary,
            filter: RwLock::new(filter),
            embedder,
        }
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    pub fn set_embedder(&mut self, embedder: Box<dyn Embedder>) {
        self.embedder = embedder;
    }

    pub fn filter(&self) -> RwLockReadGuard<'_, CuckooIndex> {
        self.filter.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn filter_mut(&self) -> RwLockWriteGuard<'_, CuckooIndex> {
        self.filter.write().unwrap_or_else(|e| e.into_inner())
    }
}

/// Per-entity abstract occurrence counts, from whole-word matches in every chunk.
pub fn entity_occurrences(
    chunks: &[String],
    dict: &EntityDictionary,
) -> BTreeMap<String, BTreeMap<PairId, u32>> {
    let mut occ: BTreeMap<String, BTreeMap<PairId, u32>> = BTreeMap::new();
    for (i, text) in chunks.iter().enumerate() {
        let owner = owner_of(i as ChunkId);
        dict.find_all(&canonical_tokens(text), |e| {
            if let Some(m) = occ.get_mut(e) {
                *m.entry(owner).or_default() += 1;
            } else {
                occ.insert(e.to_string(), BTreeMap::from([(owner, 1)]));
            }
        });
    }
    occ
}

/// Abstract holding the most occurrences of each entity; ties go to the
/// lower pair id.
pub fn concept_abstracts(occ: &BTreeMap<String, BTreeMap<PairId, u32>>) -> BTreeMap<String, PairId> {
    occ.iter()
        .filter_map(|(e, per)| {
            let best = per
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))?;
            Some((e.clone(), *best.0))
        })
        .collect()
}

pub struct IndexBuilder {
    config: Config,
    embedder: Box<dyn Embedder>,
    summarizer: Box<dyn Summarizer>,
    stoplist: HashSet<String>,
    entities: Option<Vec<String>>,
    relations: Option<Vec<RelationEdge>>,
}

impl IndexBuilder {
    pub fn new(config: Config) -> Self {
        let embedder = Box::new(HashingEmbedder::new(config.embed_dim.max(1)));
        IndexBuilder {
            config,
            embedder,
            summarizer: Box::new(LeadSentences),
            stoplist: default_stoplist(),
            entities: None,
            relations: None,
        }
    }

    pub fn embedder(mut self, embedder: Box<dyn Embedder>) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn summarizer(mut self, summarizer: Box<dyn Summarizer>) -> Self {
        self.summarizer = summarizer;
        self
    }

    pub fn stoplist(mut self, stoplist: HashSet<String>) -> Self {
        self.stoplist = stoplist;
        self
    }

    /// Uses these canonical entities instead of running the extractor.
    pub fn entities(mut self, entities: Vec<String>) -> Self {
        self.entities = Some(entities);
        self
    }

    /// Uses these relations instead of running the pattern extractor.
    pub fn relations(mut self, relations: Vec<RelationEdge>) -> Self {
        self.relations = Some(relations);
        self
    }

    pub fn build(self, docs: &[CorpusDocument]) -> Result<(IndexBundle, BuildReport), BuildError> {
        let cfg = &self.config;
        cfg.validate()?;
        if self.embedder.dim() != cfg.embed_dim {
            return Err(EmbedError::DimensionMismatch {
                expected: cfg.embed_dim,
                found: self.embedder.dim(),
            }
            .into());
        }

        let chunks: Vec<String> = docs
            .iter()
            .flat_map(|d| chunk_document(&d.text, cfg.chunk_len))
            .collect();
        let mut store = ChunkStore::new(cfg.embed_dim);
        for batch in chunks.chunks(EMBED_BATCH) {
            let refs: Vec<&str> = batch.iter().map(String::as_str).collect();
            let vectors = self.embedder.embed_batch(&refs)?;
            for (text, v) in batch.iter().zip(&vectors) {
                store.push(text.clone(), v);
            }
        }

        let abstracts = build_abstracts(&chunks, self.summarizer.as_ref());
        let mut dictionary = match &self.entities {
            Some(list) => {
                let mut d = EntityDictionary::new();
                for e in list {
                    d.insert(e.clone(), 0);
                }
                d
            }
            None => extract_entities(docs, cfg.min_entity_count, &self.stoplist),
        };
        let raw_relations = match self.relations {
            Some(r) => r,
            None => extract_relations(docs, &dictionary),
        };
        let relations = filter_relations(&raw_relations);

        let occ = entity_occurrences(&chunks, &dictionary);
        let entity_names: Vec<String> = dictionary.iter().map(|(e, _)| e.to_string()).collect();
        for e in &entity_names {
            let total = occ.get(e).map_or(0, |m| m.values().sum());
            dictionary.set_count(e, total);
        }
        let (forest, assembly) = Forest::assemble(abstracts, &relations, &concept_abstracts(&occ));

        let mut filter = CuckooIndex::new(cfg.initial_buckets, cfg.max_kicks, cfg.rng_seed)?;
        let slots = (filter.bucket_count() * crate::cuckoo::SLOTS_PER_BUCKET) as f64;
        let mut peak_load: f64 = 0.0;
        let mut mappings = 0;
        for (entity, per) in &occ {
            for &pair_id in per.keys() {
                let outcome = filter.insert(entity, pair_id)?;
                mappings += 1;
                if outcome == InsertOutcome::Failed {
                    filter.resize()?;
                    if filter.stats().stash_occupied {
                        return Err(BuildError::Capacity {
                            entity: entity.clone(),
                            bucket_count: filter.bucket_count(),
                        });
                    }
                }
                if filter.stats().resize_count == 0 {
                    peak_load = peak_load.max(filter.len() as f64 / slots);
                }
            }
        }

        let report = BuildReport {
            documents: docs.len(),
            chunks: chunks.len(),
            abstracts: forest.len(),
            entities: dictionary.len(),
            entities_indexed: occ.len(),
            mappings,
            relations_extracted: raw_relations.len(),
            relations_kept: relations.len(),
            assembly,
            forest: forest.shape(),
            filter: filter.stats(),
            peak_load_before_resize: peak_load,
        };
        let bundle = IndexBundle::new(self.config, store, forest, dictionary, filter, self.embedder);
        Ok((bundle, report))
    }
}

/// Builds with the default embedder, summarizer and extractors.
pub fn build_index(docs: &[CorpusDocument], config: Config) -> Result<(IndexBundle, BuildReport), BuildError> {
    IndexBuilder::new(config).build(docs)
}
