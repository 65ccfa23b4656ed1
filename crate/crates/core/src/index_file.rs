//! Single-file index container.
//!
//! ```text
//! magic "BRGX" | version u16 | config echo | header_crc u32
//! segment CHNK | segment FRST | segment FLTR | segment DICT
//! segment = tag[4] | len u64 | payload[len] | crc32(tag, len, payload)
//! ```
//!
//! The embedder is not stored; loaded bundles use the hashing embedder at
//! the recorded dimension unless the caller swaps it.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::codec::{put_u16, put_u32, put_u64, ByteReader, FormatError};
use crate::config::Config;
use crate::cuckoo::CuckooIndex;
use crate::embed::HashingEmbedder;
use crate::forest::Forest;
use crate::ingest::{EntityDictionary, IndexBundle};
use crate::store::ChunkStore;

pub const INDEX_MAGIC: &[u8; 4] = b"BRGX";
pub const INDEX_VERSION: u16 = 1;
pub const SEGMENT_TAGS: [&[u8; 4]; 4] = [b"CHNK", b"FRST", b"FLTR", b"DICT"];

#[derive(Debug, Error)]
pub enum IndexFileError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed index: {0}")]
    Format(#[from] FormatError),
}

fn put_segment(out: &mut Vec<u8>, tag: &[u8; 4], payload: &[u8]) {
    let start = out.len();
    out.extend_from_slice(tag);
    put_u64(out, payload.len() as u64);
    out.extend_from_slice(payload);
    let crc = crc32fast::hash(&out[start..]);
    put_u32(out, crc);
}

fn read_segment<'a>(r: &mut ByteReader<'a>, bytes: &'a [u8], tag: &[u8; 4]) -> Result<&'a [u8], FormatError> {
    let start = r.position();
    r.magic(tag)?;
    let len = r.u64()?;
    let len = usize::try_from(len).map_err(|_| FormatError::invalid("segment length", len.to_string()))?;
    let payload = r.take(len)?;
    let end = r.position();
    let crc = r.u32()?;
    if crc32fast::hash(&bytes[start..end]) != crc {
        return Err(FormatError::Checksum {
            segment: String::from_utf8_lossy(tag).into_owned(),
        });
    }
    Ok(payload)
}

impl IndexBundle {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        put_u16(&mut out, INDEX_VERSION);
        self.config.encode(&mut out);
        let crc = crc32fast::hash(&out);
        put_u32(&mut out, crc);

        let mut payload = Vec::new();
        self.store.encode_segment(&mut payload);
        put_segment(&mut out, SEGMENT_TAGS[0], &payload);
        payload.clear();
        self.forest.encode_segment(&mut payload);
        put_segment(&mut out, SEGMENT_TAGS[1], &payload);
        payload.clear();
        self.filter().encode_segment(&mut payload);
        put_segment(&mut out, SEGMENT_TAGS[2], &payload);
        payload.clear();
        self.dictionary.encode_segment(&mut payload);
        put_segment(&mut out, SEGMENT_TAGS[3], &payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<IndexBundle, FormatError> {
        let mut r = ByteReader::new(bytes);
        r.magic(INDEX_MAGIC)?;
        let version = r.u16()?;
        if version != INDEX_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let config = Config::decode(&mut r)?;
        let header_end = r.position();
        if crc32fast::hash(&bytes[..header_end]) != r.u32()? {
            return Err(FormatError::Checksum {
                segment: "header".into(),
            });
        }

        let store = ChunkStore::decode_segment(read_segment(&mut r, bytes, SEGMENT_TAGS[0])?)?;
        let forest = Forest::decode_segment(read_segment(&mut r, bytes, SEGMENT_TAGS[1])?)?;
        let filter = CuckooIndex::decode_segment(
            read_segment(&mut r, bytes, SEGMENT_TAGS[2])?,
            config.max_kicks,
            config.rng_seed,
        )?;
        let dictionary = EntityDictionary::decode_segment(read_segment(&mut r, bytes, SEGMENT_TAGS[3])?)?;
        r.finish()?;

        if store.dim() != config.embed_dim {
            return Err(FormatError::invalid(
                "chunk store",
                format!("dimension {} but config says {}", store.dim(), config.embed_dim),
            ));
        }
        if store.len() != forest.chunk_count() {
            return Err(FormatError::invalid(
                "forest",
                format!("covers {} chunks but store has {}", forest.chunk_count(), store.len()),
            ));
        }
        if let Some(bad) = filter
            .slots()
            .flat_map(|(_, s)| s.pair_ids)
            .find(|&id| id as usize >= forest.len())
        {
            return Err(FormatError::invalid("filter", format!("pair id {bad} out of range")));
        }

        let embedder = Box::new(HashingEmbedder::new(config.embed_dim));
        Ok(IndexBundle::new(config, store, forest, dictionary, filter, embedder))
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<(), IndexFileError> {
        let bytes = self.to_bytes();
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = std::path::PathBuf::from(tmp);
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<IndexBundle, IndexFileError> {
        let bytes = std::fs::read(path)?;
        Ok(IndexBundle::from_bytes(&bytes)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_index, CorpusDocument};
    use crate::retrieve::{retrieve_context, RetrieveOptions};

    fn corpus() -> Vec<CorpusDocument> {
        (0..12)
            .map(|i| CorpusDocument {
                doc_id: format!("d{i}"),
                text: format!(
                    "The Golgi Apparatus belongs to the cell. Vesicle transport {i} depends on the Golgi Apparatus. The cell contains ribosomes and vesicles."
                ),
            })
            .collect()
    }

    #[test]
    fn roundtrip_is_byte_identical_and_query_equivalent() {
        let (bundle, _) = build_index(&corpus(), Config::default()).unwrap();
        let bytes = bundle.to_bytes();
        let loaded = IndexBundle::from_bytes(&bytes).unwrap();
        assert_eq!(loaded.to_bytes(), bytes);
        let opts = RetrieveOptions::default();
        for q in ["what is the golgi apparatus", "ribosomes", "nothing"] {
            let a = retrieve_context(q, &opts, &bundle).unwrap();
            let b = retrieve_context(q, &opts, &loaded).unwrap();
            assert_eq!(a.selected_chunks, b.selected_chunks);
            assert_eq!(a.expanded_abstracts, b.expanded_abstracts);
            assert_eq!(a.prompt, b.prompt);
        }
    }

    #[test]
    fn rebuild_is_byte_identical() {
        let a = build_index(&corpus(), Config::default()).unwrap().0.to_bytes();
        let b = build_index(&corpus(), Config::default()).unwrap().0.to_bytes();
        assert_eq!(a, b);
    }

    #[test]
    fn every_flipped_byte_is_detected() {
        let (bundle, _) = build_index(&corpus()[..2], Config::default()).unwrap();
        let bytes = bundle.to_bytes();
        for i in (0..bytes.len()).step_by(7) {
            let mut bad = bytes.clone();
            bad[i] ^= 0x40;
            assert!(IndexBundle::from_bytes(&bad).is_err(), "flip at {i} accepted");
        }
        assert!(IndexBundle::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn checksum_error_names_segment() {
        let (bundle, _) = build_index(&corpus()[..2], Config::default()).unwrap();
        let mut bytes = bundle.to_bytes();
        // First payload byte of the chunk segment follows the header, tag and length.
        let header = 4 + 2 + 36 + 4;
        bytes[header + 12] ^= 1;
        match IndexBundle::from_bytes(&bytes) {
            Err(FormatError::Checksum { segment }) => assert_eq!(segment, "CHNK"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.brgx");
        let (bundle, _) = build_index(&corpus()[..3], Config::default()).unwrap();
        bundle.save(&path).unwrap();
        assert_eq!(IndexBundle::load(&path).unwrap().to_bytes(), bundle.to_bytes());
        assert!(matches!(
            IndexBundle::load(&dir.path().join("missing")),
            Err(IndexFileError::Io(_))
        ));
    }
}
