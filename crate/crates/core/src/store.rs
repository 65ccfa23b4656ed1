//! Chunk texts with their embeddings, stored as one flat f32 array.
//!
//! Segment layout: `version u16 | dim u32 | count u32 | count * (text, dim * f32)`.

use crate::codec::{put_f32, put_str, put_u16, put_u32, ByteReader, FormatError};
use crate::embed::{norm, EmbeddingVector};
use crate::ChunkId;

const STORE_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ChunkStore {
    dim: usize,
    texts: Vec<String>,
    vectors: Vec<f32>,
    norms: Vec<f64>,
}

impl ChunkStore {
    pub fn new(dim: usize) -> Self {
        ChunkStore {
            dim,
            texts: Vec::new(),
            vectors: Vec::new(),
            norms: Vec::new(),
        }
    }

    /// Panics when the vector dimension differs from the store's.
    pub fn push(&mut self, text: String, vector: &EmbeddingVector) -> ChunkId {
        assert_eq!(vector.dim(), self.dim, "embedding dimension mismatch");
        let id = self.texts.len() as ChunkId;
        self.texts.push(text);
        self.vectors.extend_from_slice(vector.as_slice());
        self.norms.push(vector.norm());
        id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn text(&self, id: ChunkId) -> &str {
        &self.texts[id as usize]
    }

    pub fn texts(&self) -> &[String] {
        &self.texts
    }

    pub fn vector(&self, id: ChunkId) -> &[f32] {
        let start = id as usize * self.dim;
        &self.vectors[start..start + self.dim]
    }

    pub fn norm(&self, id: ChunkId) -> f64 {
        self.norms[id as usize]
    }

    pub fn encode_segment(&self, out: &mut Vec<u8>) {
        put_u16(out, STORE_VERSION);
        put_u32(out, self.dim as u32);
        put_u32(out, self.texts.len() as u32);
        for (i, text) in self.texts.iter().enumerate() {
            put_str(out, text);
            for &x in self.vector(i as ChunkId) {
                put_f32(out, x);
            }
        }
    }

    pub fn decode_segment(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = ByteReader::new(bytes);
        let version = r.u16()?;
        if version != STORE_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let dim = r.u32()? as usize;
        if dim == 0 {
            return Err(FormatError::invalid("dim", "zero"));
        }
        let count = r.count(4usize.saturating_add(dim.saturating_mul(4)))?;
        let mut store = ChunkStore::new(dim);
        store.vectors.reserve(count * dim);
        for _ in 0..count {
            store.texts.push(r.string("chunk text")?);
            let start = store.vectors.len();
            for _ in 0..dim {
                let x = r.f32()?;
                if !x.is_finite() {
                    return Err(FormatError::invalid("embedding", "non-finite component"));
                }
                store.vectors.push(x);
            }
            store.norms.push(norm(&store.vectors[start..]));
        }
        r.finish()?;
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{Embedder, HashingEmbedder};

    #[test]
    fn roundtrip_preserves_texts_and_vectors() {
        let e = HashingEmbedder::new(16);
        let mut s = ChunkStore::new(16);
        for t in ["alpha beta", "gamma", ""] {
            s.push(t.to_string(), &e.embed(t).unwrap());
        }
        let mut bytes = Vec::new();
        s.encode_segment(&mut bytes);
        let back = ChunkStore::decode_segment(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.text(1), "gamma");
        assert!(ChunkStore::decode_segment(&bytes[..bytes.len() - 2]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let mut s = ChunkStore::new(1);
        s.push("x".into(), &EmbeddingVector::basis(1));
        let mut bytes = Vec::new();
        s.encode_segment(&mut bytes);
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(ChunkStore::decode_segment(&bytes).is_err());
    }
}
