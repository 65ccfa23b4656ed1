//! Entity-to-abstract cuckoo filter.
//!
//! Each bucket holds four slots. A slot carries a 12-bit fingerprint, an
//! access temperature, the entity's full 64-bit hash and the head of a block
//! linked list of abstract pair-ids. An entity lives in one of two buckets:
//!
//! ```text
//! i1 = h(x) mod B
//! i2 = i1 XOR (h(f(x)) mod B)
//! ```
//!
//! `B` is always a power of two, so the XOR step is an involution and either
//! index can be recovered from the other plus the fingerprint.
//!
//! Lookups scan `i1` then `i2` front to back and confirm a fingerprint hit
//! against the stored hash. Accessed entities get their temperature bumped
//! and their bucket queued; [`CuckooIndex::resort_dirty_buckets`] then
//! reorders queued buckets hottest-first so frequent entities are found on
//! the first probe.
//!
//! Concurrency: `lookup` and `increment_temperature` take `&self` and may run
//! from many threads at once. Everything that moves slots takes `&mut self`.

mod block;
mod codec;

use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;
use xxhash_rust::xxh64::xxh64;

use crate::PairId;

pub use block::{BlockNode, BLOCK_CAPACITY};
pub use codec::{FILTER_MAGIC, FILTER_VERSION};

use block::{BlockArena, EMPTY};

pub const SLOTS_PER_BUCKET: usize = 4;
pub const DEFAULT_BUCKETS: usize = 1024;
pub const DEFAULT_MAX_KICKS: usize = 500;

const ENTITY_SEED: u64 = 0x6272_6964_6765_0001;
const FINGERPRINT_SEED: u64 = 0x6272_6964_6765_0002;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FilterError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("capacity error: {0}")]
    Capacity(String),
}

/// Non-zero 12-bit digest of an entity. Zero marks an empty slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Fingerprint(u16);

impl Fingerprint {
    pub const BITS: u32 = 12;
    pub const MASK: u16 = (1 << Self::BITS) - 1;

    pub fn new(value: u16) -> Option<Self> {
        (value != 0 && value <= Self::MASK).then_some(Fingerprint(value))
    }

    /// Takes bits 32..44 of the entity hash; a zero result becomes 1.
    pub fn from_entity_hash(hash: u64) -> Self {
        let raw = ((hash >> 32) as u16) & Self::MASK;
        Fingerprint(if raw == 0 { 1 } else { raw })
    }

    pub fn get(self) -> u16 {
        self.0
    }
}

/// Seeded 64-bit hash of a canonical entity string.
pub fn entity_hash(entity: &str) -> u64 {
    xxh64(entity.as_bytes(), ENTITY_SEED)
}

fn fingerprint_hash(fp: u16) -> u64 {
    xxh64(&fp.to_le_bytes(), FINGERPRINT_SEED)
}

pub fn fingerprint_of(entity: &str) -> Result<Fingerprint, FilterError> {
    if entity.is_empty() {
        return Err(FilterError::InvalidArgument("empty entity".into()));
    }
    Ok(Fingerprint::from_entity_hash(entity_hash(entity)))
}

/// Candidate buckets of `entity` in a table of `bucket_count` buckets.
///
/// Panics if `bucket_count` is not a power of two.
pub fn bucket_indices(entity: &str, bucket_count: usize) -> (usize, usize) {
    assert!(bucket_count.is_power_of_two(), "bucket count must be a power of two");
    let hash = entity_hash(entity);
    let mask = bucket_count - 1;
    let i1 = primary_index(hash, mask);
    (i1, alt_index(i1, Fingerprint::from_entity_hash(hash).0, mask))
}

#[inline]
fn primary_index(hash: u64, mask: usize) -> usize {
    (hash as usize) & mask
}

#[inline]
fn alt_index(index: usize, fp: u16, mask: usize) -> usize {
    (index ^ fingerprint_hash(fp) as usize) & mask
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertOutcome {
    Created,
    Appended,
    Failed,
}

/// Snapshot of one occupied slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub fingerprint: Fingerprint,
    pub temperature: u32,
    pub entity_hash: u64,
    pub pair_ids: Vec<PairId>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FilterStats {
    pub bucket_count: usize,
    pub occupied_slots: usize,
    pub stash_occupied: bool,
    pub load_factor: f64,
    pub block_nodes: usize,
    pub kick_count: u64,
    pub resize_count: u32,
    pub failed_insert_count: u32,
    pub max_kicks: usize,
}

/// One entity's block list, borrowed from the filter.
#[derive(Clone, Copy)]
pub struct PairIds<'a> {
    head: &'a BlockNode,
    arena: &'a BlockArena,
}

impl<'a> PairIds<'a> {
    /// Ids in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = PairId> + 'a {
        self.arena
            .iter_nodes(self.head)
            .flat_map(|n| n.pair_ids().iter().copied())
    }

    pub fn len(&self) -> usize {
        self.arena.id_count(self.head)
    }

    /// Always false for a stored entity; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.head.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.arena.node_count(self.head)
    }

    pub fn to_vec(&self) -> Vec<PairId> {
        let mut out = Vec::new();
        self.arena.collect_into(self.head, &mut out);
        out
    }
}

impl std::fmt::Debug for PairIds<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    fingerprint: u16,
    temperature: u32,
    hash: u64,
    head: BlockNode,
}

/// One 128-byte line pair. Lookup reads fingerprints, hashes and the inline
/// head nodes; temperatures and the dirty flag trail at the end.
#[derive(Default)]
#[repr(C, align(128))]
struct Bucket {
    fingerprints: [u16; SLOTS_PER_BUCKET],
    hashes: [u64; SLOTS_PER_BUCKET],
    heads: [BlockNode; SLOTS_PER_BUCKET],
    temperatures: [AtomicU32; SLOTS_PER_BUCKET],
    dirty: AtomicBool,
}

impl Clone for Bucket {
    fn clone(&self) -> Self {
        Bucket {
            fingerprints: self.fingerprints,
            temperatures: std::array::from_fn(|s| {
                AtomicU32::new(self.temperatures[s].load(Ordering::Relaxed))
            }),
            hashes: self.hashes,
            heads: self.heads,
            dirty: AtomicBool::new(self.dirty.load(Ordering::Relaxed)),
        }
    }
}

impl Bucket {
    /// Requests both cache lines so the head nodes arrive with the hashes.
    #[inline(always)]
    fn prefetch(&self) {
        prefetch(&self.fingerprints);
        prefetch(&self.heads[SLOTS_PER_BUCKET - 1]);
    }

    /// Occupied slots are kept contiguous from slot 0.
    fn len(&self) -> usize {
        self.fingerprints.iter().take_while(|&&fp| fp != 0).count()
    }

    fn entry(&self, s: usize) -> Entry {
        Entry {
            fingerprint: self.fingerprints[s],
            temperature: self.temperatures[s].load(Ordering::Relaxed),
            hash: self.hashes[s],
            head: self.heads[s],
        }
    }

    fn set(&mut self, s: usize, e: Entry) {
        self.fingerprints[s] = e.fingerprint;
        *self.temperatures[s].get_mut() = e.temperature;
        self.hashes[s] = e.hash;
        self.heads[s] = e.head;
    }

    fn clear(&mut self, s: usize) {
        self.set(
            s,
            Entry {
                fingerprint: 0,
                temperature: 0,
                hash: 0,
                head: BlockNode::default(),
            },
        );
    }

    fn try_put(&mut self, e: Entry) -> bool {
        match self.fingerprints.iter().position(|&fp| fp == 0) {
            Some(s) => {
                self.set(s, e);
                true
            }
            None => false,
        }
    }

    /// Linear scan. Returns the matching slot and the number of fingerprints compared.
    #[inline]
    fn find(&self, fp: u16, hash: u64) -> (Option<usize>, u32) {
        let mut probes = 0;
        for s in 0..SLOTS_PER_BUCKET {
            let f = self.fingerprints[s];
            if f == 0 {
                break;
            }
            probes += 1;
            if f == fp && self.hashes[s] == hash {
                return (Some(s), probes);
            }
        }
        (None, probes)
    }

    fn has_fingerprint(&self, fp: u16) -> bool {
        self.fingerprints.contains(&fp)
    }

    /// Stable descending sort by temperature; empty slots stay at the back.
    fn resort(&mut self) {
        let n = self.len();
        let mut entries: Vec<Entry> = (0..n).map(|s| self.entry(s)).collect();
        entries.sort_by_key(|e| std::cmp::Reverse(e.temperature));
        for (s, e) in entries.into_iter().enumerate() {
            self.set(s, e);
        }
    }
}

struct StashSlot {
    fingerprint: u16,
    temperature: AtomicU32,
    hash: u64,
    head: BlockNode,
}

impl StashSlot {
    fn from_entry(e: Entry) -> Self {
        StashSlot {
            fingerprint: e.fingerprint,
            temperature: AtomicU32::new(e.temperature),
            hash: e.hash,
            head: e.head,
        }
    }

    fn entry(&self) -> Entry {
        Entry {
            fingerprint: self.fingerprint,
            temperature: self.temperature.load(Ordering::Relaxed),
            hash: self.hash,
            head: self.head,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Location {
    Bucket(usize, usize),
    Stash,
}

#[derive(Clone, Copy)]
struct Key {
    hash: u64,
    fp: u16,
}

impl Key {
    fn new(entity: &str) -> Option<Key> {
        if entity.is_empty() {
            return None;
        }
        let hash = entity_hash(entity);
        Some(Key {
            hash,
            fp: Fingerprint::from_entity_hash(hash).0,
        })
    }
}

pub struct CuckooIndex {
    buckets: Vec<Bucket>,
    mask: usize,
    arena: BlockArena,
    stash: Option<StashSlot>,
    len: usize,
    max_kicks: usize,
    seed: u64,
    rng: ChaCha8Rng,
    dirty: Mutex<Vec<u32>>,
    kick_count: u64,
    resize_count: u32,
    failed_insert_count: u32,
}

impl Clone for CuckooIndex {
    fn clone(&self) -> Self {
        CuckooIndex {
            buckets: self.buckets.clone(),
            mask: self.mask,
            arena: self.arena.clone(),
            stash: self.stash.as_ref().map(|s| StashSlot::from_entry(s.entry())),
            len: self.len,
            max_kicks: self.max_kicks,
            seed: self.seed,
            rng: self.rng.clone(),
            dirty: Mutex::new(self.dirty_list().clone()),
            kick_count: self.kick_count,
            resize_count: self.resize_count,
            failed_insert_count: self.failed_insert_count,
        }
    }
}

impl std::fmt::Debug for CuckooIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CuckooIndex").field("stats", &self.stats()).finish()
    }
}

impl CuckooIndex {
    pub fn new(bucket_count: usize, max_kicks: usize, seed: u64) -> Result<Self, FilterError> {
        if !bucket_count.is_power_of_two() {
            return Err(FilterError::InvalidArgument(format!(
                "bucket count {bucket_count} is not a power of two"
            )));
        }
        Ok(CuckooIndex {
            buckets: alloc_buckets(bucket_count)?,
            mask: bucket_count - 1,
            arena: BlockArena::default(),
            stash: None,
            len: 0,
            max_kicks,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            dirty: Mutex::new(Vec::new()),
            kick_count: 0,
            resize_count: 0,
            failed_insert_count: 0,
        })
    }

    pub fn with_defaults(seed: u64) -> Self {
        Self::new(DEFAULT_BUCKETS, DEFAULT_MAX_KICKS, seed).expect("default geometry is valid")
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    /// Number of distinct entities held, stash included.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn max_kicks(&self) -> usize {
        self.max_kicks
    }

    pub fn stats(&self) -> FilterStats {
        let occupied = self.len - usize::from(self.stash.is_some());
        FilterStats {
            bucket_count: self.buckets.len(),
            occupied_slots: occupied,
            stash_occupied: self.stash.is_some(),
            load_factor: occupied as f64 / (SLOTS_PER_BUCKET * self.buckets.len()) as f64,
            block_nodes: self.len + self.arena.live_nodes(),
            kick_count: self.kick_count,
            resize_count: self.resize_count,
            failed_insert_count: self.failed_insert_count,
            max_kicks: self.max_kicks,
        }
    }

    fn dirty_list(&self) -> std::sync::MutexGuard<'_, Vec<u32>> {
        self.dirty.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn locate(&self, key: Key) -> (Option<Location>, u32) {
        let i1 = primary_index(key.hash, self.mask);
        let i2 = alt_index(i1, key.fp, self.mask);
        self.buckets[i1].prefetch();
        self.buckets[i2].prefetch();
        let (hit, p1) = self.buckets[i1].find(key.fp, key.hash);
        if let Some(s) = hit {
            return (Some(Location::Bucket(i1, s)), p1);
        }
        let mut probes = p1;
        if i2 != i1 {
            let (hit, p2) = self.buckets[i2].find(key.fp, key.hash);
            probes += p2;
            if let Some(s) = hit {
                return (Some(Location::Bucket(i2, s)), probes);
            }
        }
        match &self.stash {
            Some(st) if st.fingerprint == key.fp && st.hash == key.hash => {
                (Some(Location::Stash), probes + 1)
            }
            _ => (None, probes),
        }
    }

    fn head_at(&self, loc: Location) -> &BlockNode {
        match loc {
            Location::Bucket(b, s) => &self.buckets[b].heads[s],
            Location::Stash => &self.stash.as_ref().expect("stash location").head,
        }
    }

    fn temperature_cell(&self, loc: Location) -> &AtomicU32 {
        match loc {
            Location::Bucket(b, s) => &self.buckets[b].temperatures[s],
            Location::Stash => &self.stash.as_ref().expect("stash location").temperature,
        }
    }

    /// Maps `entity` to `pair_id`. A known entity gets the id appended to its
    /// block list; a new one is placed by cuckoo relocation, doubling the
    /// table once if the kick budget runs out.
    pub fn insert(&mut self, entity: &str, pair_id: PairId) -> Result<InsertOutcome, FilterError> {
        let key = Key::new(entity)
            .ok_or_else(|| FilterError::InvalidArgument("empty entity".into()))?;
        if pair_id == EMPTY {
            return Err(FilterError::InvalidArgument(format!("pair id {pair_id} is reserved")));
        }
        if let (Some(loc), _) = self.locate(key) {
            let head = match loc {
                Location::Bucket(b, s) => &mut self.buckets[b].heads[s],
                Location::Stash => &mut self.stash.as_mut().expect("stash location").head,
            };
            self.arena.push_unique(head, pair_id);
            return Ok(InsertOutcome::Appended);
        }
        if self.stash.is_some() {
            self.rebuild(self.buckets.len() * 2, Vec::new())?;
        }
        let entry = Entry {
            fingerprint: key.fp,
            temperature: 0,
            hash: key.hash,
            head: BlockNode::with_first(pair_id),
        };
        self.len += 1;
        match self.place(entry) {
            Ok(()) => Ok(InsertOutcome::Created),
            Err(homeless) => {
                self.rebuild(self.buckets.len() * 2, vec![homeless])?;
                if self.stash.is_some() {
                    self.failed_insert_count += 1;
                    Ok(InsertOutcome::Failed)
                } else {
                    Ok(InsertOutcome::Created)
                }
            }
        }
    }

    /// Places an entry at `i1`/`i2` or by random eviction. On kick exhaustion
    /// returns whichever entry was left without a slot.
    fn place(&mut self, mut entry: Entry) -> Result<(), Entry> {
        let i1 = primary_index(entry.hash, self.mask);
        let i2 = alt_index(i1, entry.fingerprint, self.mask);
        if self.buckets[i1].try_put(entry) || self.buckets[i2].try_put(entry) {
            return Ok(());
        }
        let mut i = if self.rng.random::<bool>() { i1 } else { i2 };
        for _ in 0..self.max_kicks {
            let s = self.rng.random_range(0..SLOTS_PER_BUCKET);
            let victim = self.buckets[i].entry(s);
            self.buckets[i].set(s, entry);
            self.mark_dirty_mut(i);
            self.kick_count += 1;
            entry = victim;
            i = alt_index(i, entry.fingerprint, self.mask);
            if self.buckets[i].try_put(entry) {
                return Ok(());
            }
        }
        Err(entry)
    }

    fn mark_dirty_mut(&mut self, b: usize) {
        if !std::mem::replace(self.buckets[b].dirty.get_mut(), true) {
            self.dirty.get_mut().unwrap_or_else(|e| e.into_inner()).push(b as u32);
        }
    }

    /// Rehashes every entry into `bucket_count` buckets, doubling further if
    /// more than one entry cannot be placed.
    fn rebuild(&mut self, mut bucket_count: usize, mut pending: Vec<Entry>) -> Result<(), FilterError> {
        loop {
            let fresh = alloc_buckets(bucket_count)?;
            let old = std::mem::replace(&mut self.buckets, fresh);
            self.mask = bucket_count - 1;
            self.resize_count += 1;
            self.dirty.get_mut().unwrap_or_else(|e| e.into_inner()).clear();

            let mut entries = Vec::with_capacity(self.len);
            for bucket in &old {
                entries.extend((0..bucket.len()).map(|s| bucket.entry(s)));
            }
            drop(old);
            if let Some(st) = self.stash.take() {
                entries.push(st.entry());
            }
            entries.append(&mut pending);

            let mut homeless = Vec::new();
            for e in entries {
                if let Err(h) = self.place(e) {
                    homeless.push(h);
                }
            }
            match homeless.len() {
                0 => return Ok(()),
                1 => {
                    self.stash = homeless.pop().map(StashSlot::from_entry);
                    return Ok(());
                }
                _ => {
                    pending = homeless;
                    bucket_count = bucket_count.checked_mul(2).ok_or_else(|| {
                        FilterError::Capacity("bucket count overflow".into())
                    })?;
                }
            }
        }
    }

    /// Doubles the bucket count and re-places every entry from its stored hash.
    pub fn resize(&mut self) -> Result<(), FilterError> {
        let next = self
            .buckets
            .len()
            .checked_mul(2)
            .ok_or_else(|| FilterError::Capacity("bucket count overflow".into()))?;
        self.rebuild(next, Vec::new())
    }

    /// Pair-ids mapped to `entity`, in insertion order. Leaves temperatures alone.
    pub fn lookup(&self, entity: &str) -> Option<Vec<PairId>> {
        self.find(entity).map(|ids| ids.to_vec())
    }

    /// Like [`lookup`](Self::lookup), also reporting how many slot
    /// fingerprints were compared before the scan ended.
    pub fn lookup_with_probes(&self, entity: &str) -> (Option<Vec<PairId>>, u32) {
        let (ids, probes) = self.find_with_probes(entity);
        (ids.map(|ids| ids.to_vec()), probes)
    }

    /// Borrowed view of the entity's block list, without copying it out.
    pub fn find(&self, entity: &str) -> Option<PairIds<'_>> {
        self.find_with_probes(entity).0
    }

    pub fn find_with_probes(&self, entity: &str) -> (Option<PairIds<'_>>, u32) {
        let Some(key) = Key::new(entity) else {
            return (None, 0);
        };
        let (loc, probes) = self.locate(key);
        let ids = loc.map(|loc| PairIds {
            head: self.head_at(loc),
            arena: &self.arena,
        });
        (ids, probes)
    }

    pub fn contains(&self, entity: &str) -> bool {
        Key::new(entity).is_some_and(|k| self.locate(k).0.is_some())
    }

    /// Fingerprint-only membership: true when any occupied slot in either
    /// candidate bucket carries the entity's fingerprint. This is what a
    /// plain cuckoo filter would answer.
    pub fn fingerprint_match(&self, entity: &str) -> bool {
        let Some(key) = Key::new(entity) else {
            return false;
        };
        let i1 = primary_index(key.hash, self.mask);
        let i2 = alt_index(i1, key.fp, self.mask);
        self.buckets[i1].has_fingerprint(key.fp)
            || self.buckets[i2].has_fingerprint(key.fp)
            || self.stash.as_ref().is_some_and(|s| s.fingerprint == key.fp)
    }

    pub fn temperature(&self, entity: &str) -> Option<u32> {
        let key = Key::new(entity)?;
        let loc = self.locate(key).0?;
        Some(self.temperature_cell(loc).load(Ordering::Relaxed))
    }

    pub fn block_node_count(&self, entity: &str) -> Option<usize> {
        self.find(entity).map(|ids| ids.node_count())
    }

    /// Bumps the entity's temperature (saturating) and queues its bucket for
    /// the next resort. No-op for absent entities.
    pub fn increment_temperature(&self, entity: &str) {
        let Some(key) = Key::new(entity) else {
            return;
        };
        let Some(loc) = self.locate(key).0 else {
            return;
        };
        let _ = self
            .temperature_cell(loc)
            .fetch_update(Ordering::Relaxed, Ordering::Relaxed, |t| t.checked_add(1));
        if let Location::Bucket(b, _) = loc {
            if !self.buckets[b].dirty.swap(true, Ordering::AcqRel) {
                self.dirty_list().push(b as u32);
            }
        }
    }

    /// Number of buckets waiting for a resort.
    pub fn dirty_bucket_count(&self) -> usize {
        self.dirty_list().len()
    }

    /// Reorders every queued bucket hottest-first (stable on ties) and clears
    /// the queue. Returns how many buckets were processed.
    pub fn resort_dirty_buckets(&mut self) -> usize {
        let queued = std::mem::take(self.dirty.get_mut().unwrap_or_else(|e| e.into_inner()));
        for &b in &queued {
            let bucket = &mut self.buckets[b as usize];
            bucket.resort();
            *bucket.dirty.get_mut() = false;
        }
        queued.len()
    }

    /// Removes the entity and frees its block list.
    pub fn delete(&mut self, entity: &str) -> bool {
        let Some(key) = Key::new(entity) else {
            return false;
        };
        let Some(loc) = self.locate(key).0 else {
            return false;
        };
        match loc {
            Location::Bucket(b, s) => {
                let bucket = &mut self.buckets[b];
                let head = bucket.heads[s];
                let n = bucket.len();
                for t in s..n - 1 {
                    let next = bucket.entry(t + 1);
                    bucket.set(t, next);
                }
                bucket.clear(n - 1);
                self.arena.release(&head);
            }
            Location::Stash => {
                if let Some(st) = self.stash.take() {
                    self.arena.release(&st.head);
                }
            }
        }
        self.len -= 1;
        true
    }

    /// Occupied slots of bucket `b`, front to back.
    pub fn bucket_slots(&self, b: usize) -> Vec<Slot> {
        let bucket = &self.buckets[b];
        (0..bucket.len())
            .map(|s| self.snapshot(bucket.entry(s)))
            .collect()
    }

    fn snapshot(&self, e: Entry) -> Slot {
        let mut pair_ids = Vec::new();
        self.arena.collect_into(&e.head, &mut pair_ids);
        Slot {
            fingerprint: Fingerprint(e.fingerprint),
            temperature: e.temperature,
            entity_hash: e.hash,
            pair_ids,
        }
    }

    /// Every stored entry with the bucket it sits in (`None` for the stash).
    pub fn slots(&self) -> impl Iterator<Item = (Option<usize>, Slot)> + '_ {
        let resident = (0..self.buckets.len())
            .flat_map(move |b| self.bucket_slots(b).into_iter().map(move |s| (Some(b), s)));
        resident.chain(self.stash.iter().map(|st| (None, self.snapshot(st.entry()))))
    }

    /// True when `b` is one of the two candidate buckets for a slot with this
    /// hash and fingerprint.
    pub fn is_candidate_bucket(&self, b: usize, entity_hash: u64, fp: Fingerprint) -> bool {
        let i1 = primary_index(entity_hash, self.mask);
        b == i1 || b == alt_index(i1, fp.0, self.mask)
    }
}

/// Starts loading `b` into cache without waiting for it.
#[inline(always)]
fn prefetch<T>(b: &T) {
    #[cfg(target_arch = "x86_64")]
    {
        use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
        // SAFETY: SSE is part of the x86_64 baseline, and a prefetch never
        // faults even on an invalid address.
        unsafe { _mm_prefetch::<_MM_HINT_T0>((b as *const T).cast()) };
    }
    #[cfg(not(target_arch = "x86_64"))]
    let _ = b;
}

/// Large tables are probed at random; backing them with huge pages keeps
/// most probes clear of TLB misses. Advisory only.
fn advise_huge_pages(start: usize, bytes: usize) {
    #[cfg(target_os = "linux")]
    {
        const HUGE: usize = 2 << 20;
        if bytes < 2 * HUGE {
            return;
        }
        let aligned = start.next_multiple_of(HUGE);
        let len = (start + bytes - aligned) / HUGE * HUGE;
        // SAFETY: the range lies inside a live, not yet initialized
        // allocation, and MADV_HUGEPAGE does not change its contents.
        unsafe {
            libc::madvise(aligned as *mut libc::c_void, len, libc::MADV_HUGEPAGE);
        }
    }
    #[cfg(not(target_os = "linux"))]
    let _ = (start, bytes);
}

fn alloc_buckets(count: usize) -> Result<Vec<Bucket>, FilterError> {
    let mut v = Vec::new();
    v.try_reserve_exact(count)
        .map_err(|e| FilterError::Capacity(format!("cannot allocate {count} buckets: {e}")))?;
    advise_huge_pages(v.spare_capacity_mut().as_ptr() as usize, count * std::mem::size_of::<Bucket>());
    v.resize_with(count, Bucket::default);
    Ok(v)
}
