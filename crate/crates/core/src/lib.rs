//! Retrieval index that bridges query entities to document chunks through a
//! forest of abstracts.
//!
//! Build time groups chunks into abstracts of five, links abstracts into
//! trees from extracted concept relations, and records every entity's
//! abstracts in a cuckoo filter whose slots hold block linked lists. Query
//! time recognizes entities, looks up their abstracts, widens the set along
//! the trees, and ranks only the chunks under that set by cosine similarity.

pub mod bench;
pub mod codec;
pub mod config;
pub mod cuckoo;
pub mod embed;
pub mod forest;
pub mod index_file;
pub mod ingest;
pub mod retrieve;
pub mod store;
pub mod text;

/// Identifier of an abstract; it owns chunks `5i ..= 5i + 4`.
pub type PairId = u32;
/// Dense chunk identifier, `0..N`.
pub type ChunkId = u32;

pub use codec::FormatError;
pub use config::Config;
pub use cuckoo::{CuckooIndex, FilterStats, Fingerprint, InsertOutcome};
pub use embed::{cosine_similarity, EmbedError, Embedder, EmbeddingVector, HashingEmbedder};
pub use forest::{Abstract, Forest, RelationEdge, RelationKind};
pub use ingest::{EntityDictionary, IndexBuilder, IndexBundle};
pub use retrieve::{ContextResult, RetrieveOptions};
pub use store::ChunkStore;
