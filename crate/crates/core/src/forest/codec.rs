//! Forest segment layout (little-endian):
//!
//! ```text
//! version u16 | chunk_count u32 | abstract_count u32
//! abstract_count records:
//!     pair_id u32 | parent i64 (-1 = none) | child_count u32 | children u32[] | summary (u32 len + UTF-8)
//! ```

use super::{Abstract, Forest, CHUNKS_PER_ABSTRACT};
use crate::codec::{put_i64, put_str, put_u16, put_u32, ByteReader, FormatError};
use crate::{ChunkId, PairId};

pub const FOREST_VERSION: u16 = 1;

impl Forest {
    pub fn encode_segment(&self, out: &mut Vec<u8>) {
        put_u16(out, FOREST_VERSION);
        put_u32(out, self.chunk_count as u32);
        put_u32(out, self.abstracts.len() as u32);
        for a in &self.abstracts {
            put_u32(out, a.pair_id);
            put_i64(out, a.parent.map_or(-1, i64::from));
            put_u32(out, a.children.len() as u32);
            for &c in &a.children {
                put_u32(out, c);
            }
            put_str(out, &a.summary);
        }
    }

    /// Decodes and validates a forest segment: ids are dense, spans follow
    /// from `chunk_count`, parent and child lists agree, and no cycles exist.
    pub fn decode_segment(bytes: &[u8]) -> Result<Forest, FormatError> {
        let mut r = ByteReader::new(bytes);
        let version = r.u16()?;
        if version != FOREST_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let chunk_count = r.u32()? as usize;
        let n = r.count(4 + 8 + 4 + 4)?;
        if n != chunk_count.div_ceil(CHUNKS_PER_ABSTRACT) {
            return Err(FormatError::invalid(
                "abstract_count",
                format!("{n} abstracts for {chunk_count} chunks"),
            ));
        }
        let mut abstracts = Vec::with_capacity(n);
        for i in 0..n {
            let pair_id = r.u32()?;
            if pair_id as usize != i {
                return Err(FormatError::invalid("pair_id", format!("expected {i}, found {pair_id}")));
            }
            let parent = match r.i64()? {
                -1 => None,
                p if p >= 0 && (p as usize) < n && p as usize != i => Some(p as PairId),
                p => return Err(FormatError::invalid("parent", p.to_string())),
            };
            let child_count = r.count(4)?;
            let mut children = Vec::with_capacity(child_count);
            for _ in 0..child_count {
                let c = r.u32()?;
                if c as usize >= n {
                    return Err(FormatError::invalid("child", c.to_string()));
                }
                if children.last().is_some_and(|&prev| prev >= c) {
                    return Err(FormatError::invalid("children", "not strictly ascending"));
                }
                children.push(c);
            }
            let summary = r.string("summary")?;
            let first = (i * CHUNKS_PER_ABSTRACT) as ChunkId;
            let last = ((i * CHUNKS_PER_ABSTRACT + CHUNKS_PER_ABSTRACT).min(chunk_count) - 1) as ChunkId;
            abstracts.push(Abstract {
                pair_id,
                summary,
                parent,
                children,
                first_chunk: first,
                last_chunk: last,
            });
        }
        r.finish()?;

        let mut expected: Vec<Vec<PairId>> = vec![Vec::new(); n];
        for a in &abstracts {
            if let Some(p) = a.parent {
                expected[p as usize].push(a.pair_id);
            }
        }
        for (a, exp) in abstracts.iter().zip(&expected) {
            if &a.children != exp {
                return Err(FormatError::invalid(
                    "children",
                    format!("abstract {} children disagree with parent links", a.pair_id),
                ));
            }
        }
        // 0 = unvisited, 1 = on the current walk, 2 = reaches a root.
        let mut state = vec![0u8; n];
        let mut path = Vec::new();
        for start in 0..n {
            path.clear();
            let mut cur = Some(start as PairId);
            while let Some(c) = cur {
                match state[c as usize] {
                    2 => break,
                    1 => {
                        return Err(FormatError::invalid("parent", format!("cycle through abstract {c}")));
                    }
                    _ => {}
                }
                state[c as usize] = 1;
                path.push(c);
                cur = abstracts[c as usize].parent;
            }
            for &c in &path {
                state[c as usize] = 2;
            }
        }
        Ok(Forest {
            abstracts,
            chunk_count,
        })
    }
}
