//! Filter segment layout (little-endian):
//!
//! ```text
//! magic "BRGF" | version u16 | bucket_count u32
//! bucket_count * 4 records:
//!     fingerprint u16 | temperature u32 | entity_hash u64 | pair_id_count u32 | pair_ids u32[count]
//! kick_count u64 | resize_count u32 | failed_insert_count u32
//! stash_flag u8 [| one record]
//! ```
//!
//! Empty slots are written as all-zero records. Block lists are flattened on
//! disk and rebuilt as 3-id nodes on load.

use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::block::{BlockArena, EMPTY};
use super::{
    alloc_buckets, alt_index, primary_index, CuckooIndex, Entry, Fingerprint, StashSlot,
    SLOTS_PER_BUCKET,
};
use crate::codec::{put_u16, put_u32, put_u64, ByteReader, FormatError};

pub const FILTER_MAGIC: &[u8; 4] = b"BRGF";
pub const FILTER_VERSION: u16 = 1;

const MIN_RECORD_BYTES: usize = 2 + 4 + 8 + 4;
/// Upper bound accepted on load; 2^28 buckets is already ~5 GiB of records.
const MAX_BUCKETS: usize = 1 << 28;

impl CuckooIndex {
    pub fn encode_segment(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(FILTER_MAGIC);
        put_u16(out, FILTER_VERSION);
        put_u32(out, self.buckets.len() as u32);
        for bucket in &self.buckets {
            for s in 0..SLOTS_PER_BUCKET {
                self.put_record(out, bucket.entry(s));
            }
        }
        put_u64(out, self.kick_count);
        put_u32(out, self.resize_count);
        put_u32(out, self.failed_insert_count);
        match &self.stash {
            Some(st) => {
                out.push(1);
                self.put_record(out, st.entry());
            }
            None => out.push(0),
        }
    }

    fn put_record(&self, out: &mut Vec<u8>, e: Entry) {
        put_u16(out, e.fingerprint);
        put_u32(out, e.temperature);
        put_u64(out, e.hash);
        if e.fingerprint == 0 {
            put_u32(out, 0);
            return;
        }
        put_u32(out, self.arena.id_count(&e.head) as u32);
        for node in self.arena.iter_nodes(&e.head) {
            for &id in node.pair_ids() {
                put_u32(out, id);
            }
        }
    }

    /// Decodes a filter segment. `max_kicks` and `seed` are not stored in
    /// the segment and come from the surrounding configuration.
    pub fn decode_segment(bytes: &[u8], max_kicks: usize, seed: u64) -> Result<Self, FormatError> {
        let mut r = ByteReader::new(bytes);
        r.magic(FILTER_MAGIC)?;
        let version = r.u16()?;
        if version != FILTER_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let bucket_count = r.u32()? as usize;
        if !bucket_count.is_power_of_two() || bucket_count > MAX_BUCKETS {
            return Err(FormatError::invalid("bucket_count", bucket_count.to_string()));
        }
        let min_bytes = bucket_count * SLOTS_PER_BUCKET * MIN_RECORD_BYTES;
        if min_bytes > r.remaining() {
            return Err(FormatError::Truncated {
                offset: r.position(),
                needed: min_bytes - r.remaining(),
            });
        }
        let mut buckets = alloc_buckets(bucket_count)
            .map_err(|e| FormatError::invalid("bucket_count", e.to_string()))?;
        let mask = bucket_count - 1;
        let mut arena = BlockArena::default();
        let mut seen = std::collections::HashSet::new();
        let mut len = 0usize;
        let mut ids = Vec::new();

        for (b, bucket) in buckets.iter_mut().enumerate() {
            let mut saw_empty = false;
            for s in 0..SLOTS_PER_BUCKET {
                let Some(entry) = read_record(&mut r, &mut arena, &mut ids)? else {
                    saw_empty = true;
                    continue;
                };
                if saw_empty {
                    return Err(FormatError::invalid("bucket", format!("bucket {b} has a gap before slot {s}")));
                }
                let i1 = primary_index(entry.hash, mask);
                if b != i1 && b != alt_index(i1, entry.fingerprint, mask) {
                    return Err(FormatError::invalid("slot", format!("entry in bucket {b} does not hash there")));
                }
                if !seen.insert(entry.hash) {
                    return Err(FormatError::invalid("slot", "duplicate entity hash"));
                }
                bucket.set(s, entry);
                len += 1;
            }
        }

        let kick_count = r.u64()?;
        let resize_count = r.u32()?;
        let failed_insert_count = r.u32()?;
        let stash = match r.u8()? {
            0 => None,
            1 => {
                let entry = read_record(&mut r, &mut arena, &mut ids)?
                    .ok_or_else(|| FormatError::invalid("stash", "flagged but empty"))?;
                if !seen.insert(entry.hash) {
                    return Err(FormatError::invalid("stash", "duplicate entity hash"));
                }
                len += 1;
                Some(StashSlot::from_entry(entry))
            }
            f => return Err(FormatError::invalid("stash flag", f.to_string())),
        };
        r.finish()?;

        Ok(CuckooIndex {
            buckets,
            mask,
            arena,
            stash,
            len,
            max_kicks,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            dirty: Mutex::new(Vec::new()),
            kick_count,
            resize_count,
            failed_insert_count,
        })
    }
}

fn read_record(
    r: &mut ByteReader<'_>,
    arena: &mut BlockArena,
    ids: &mut Vec<u32>,
) -> Result<Option<Entry>, FormatError> {
    let fingerprint = r.u16()?;
    let temperature = r.u32()?;
    let hash = r.u64()?;
    let count = r.count(4)?;
    if fingerprint == 0 {
        if temperature != 0 || hash != 0 || count != 0 {
            return Err(FormatError::invalid("slot", "empty slot with payload"));
        }
        return Ok(None);
    }
    if Fingerprint::from_entity_hash(hash).get() != fingerprint {
        return Err(FormatError::invalid("slot", "fingerprint does not match entity hash"));
    }
    if count == 0 {
        return Err(FormatError::invalid("slot", "occupied slot without pair ids"));
    }
    ids.clear();
    for _ in 0..count {
        ids.push(r.u32()?);
    }
    if ids.contains(&EMPTY) {
        return Err(FormatError::invalid("slot", "reserved pair id in block list"));
    }
    let mut sorted = ids.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(FormatError::invalid("slot", "duplicate pair id in block list"));
    }
    Ok(Some(Entry {
        fingerprint,
        temperature,
        hash,
        head: arena.list_of(ids),
    }))
}
