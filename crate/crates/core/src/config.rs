use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{put_u32, put_u64, ByteReader, FormatError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid configuration: {field} {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

/// Build and query parameters. Every source of randomness is seeded from
/// `rng_seed`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Config {
    /// Target chunk length in tokens.
    pub chunk_len: usize,
    pub embed_dim: usize,
    pub k: usize,
    pub max_depth: usize,
    pub min_entity_count: usize,
    pub initial_buckets: usize,
    pub max_kicks: usize,
    pub rng_seed: u64,
}

pub const MAX_DEPTH_LIMIT: usize = 3;
pub const MIN_CHUNK_LEN: usize = 16;

impl Default for Config {
    fn default() -> Self {
        Config {
            chunk_len: 128,
            embed_dim: 256,
            k: 5,
            max_depth: 3,
            min_entity_count: 2,
            initial_buckets: 1024,
            max_kicks: 500,
            rng_seed: 0x5EED,
        }
    }
}

fn err(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError {
        field,
        reason: reason.into(),
    }
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.chunk_len < MIN_CHUNK_LEN {
            return Err(err("chunk_len", format!("must be at least {MIN_CHUNK_LEN}")));
        }
        if self.embed_dim == 0 {
            return Err(err("embed_dim", "must be positive"));
        }
        if self.k == 0 {
            return Err(err("k", "must be at least 1"));
        }
        validate_depth(self.max_depth)?;
        if self.min_entity_count == 0 {
            return Err(err("min_entity_count", "must be at least 1"));
        }
        if !self.initial_buckets.is_power_of_two() {
            return Err(err("initial_buckets", "must be a power of two"));
        }
        if self.max_kicks == 0 {
            return Err(err("max_kicks", "must be at least 1"));
        }
        Ok(())
    }

    /// Fixed-width echo stored in the index header.
    pub fn encode(&self, out: &mut Vec<u8>) {
        put_u32(out, self.chunk_len as u32);
        put_u32(out, self.embed_dim as u32);
        put_u32(out, self.k as u32);
        put_u32(out, self.max_depth as u32);
        put_u32(out, self.min_entity_count as u32);
        put_u32(out, self.initial_buckets as u32);
        put_u32(out, self.max_kicks as u32);
        put_u64(out, self.rng_seed);
    }

    pub(crate) fn decode(r: &mut ByteReader<'_>) -> Result<Config, FormatError> {
        let cfg = Config {
            chunk_len: r.u32()? as usize,
            embed_dim: r.u32()? as usize,
            k: r.u32()? as usize,
            max_depth: r.u32()? as usize,
            min_entity_count: r.u32()? as usize,
            initial_buckets: r.u32()? as usize,
            max_kicks: r.u32()? as usize,
            rng_seed: r.u64()?,
        };
        cfg.validate()
            .map_err(|e| FormatError::invalid("config", e.to_string()))?;
        Ok(cfg)
    }
}

pub fn validate_depth(depth: usize) -> Result<(), ConfigError> {
    if (1..=MAX_DEPTH_LIMIT).contains(&depth) {
        Ok(())
    } else {
        Err(err("max_depth", format!("must be between 1 and {MAX_DEPTH_LIMIT}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = Config::default();
        c.validate().unwrap();
        assert_eq!((c.k, c.max_depth, c.initial_buckets, c.max_kicks), (5, 3, 1024, 500));
    }

    #[test]
    fn rejects_out_of_range_fields() {
        let bad = [
            Config { max_depth: 4, ..Config::default() },
            Config { max_depth: 0, ..Config::default() },
            Config { k: 0, ..Config::default() },
            Config { initial_buckets: 1000, ..Config::default() },
            Config { chunk_len: 8, ..Config::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn echo_roundtrip() {
        let c = Config { rng_seed: 99, k: 7, ..Config::default() };
        let mut buf = Vec::new();
        c.encode(&mut buf);
        let mut r = ByteReader::new(&buf);
        assert_eq!(Config::decode(&mut r).unwrap(), c);
        r.finish().unwrap();
    }
}
