//! The random oracle `H`.
//!
//! Two interchangeable modes are provided. `HashDerived` instantiates `H` with
//! SHAKE256 over `domain || out_bits || seed_len || seed || x`, which is
//! deterministic across processes and safe to share between threads.
//! `Table` lazily samples a fresh uniform output for each new input from a
//! seeded ChaCha stream; the table is only reproducible when the query order
//! is, so game loops that use it are single-threaded.
//!
//! Outputs of different lengths come from independent functions: the output
//! length is part of the hashed domain (and of the table key).

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;

use crate::error::{Error, Result};

const DOMAIN: &[u8] = b"rgc-random-oracle-v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleMode {
    HashDerived { seed: Vec<u8> },
    Table { rng_seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    pub output_len_bits: usize,
    pub mode: OracleMode,
}

impl OracleConfig {
    pub fn new(output_len_bits: usize, mode: OracleMode) -> Result<Self> {
        let cfg = Self {
            output_len_bits,
            mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.output_len_bits < 8 || !self.output_len_bits.is_multiple_of(8) {
            return Err(Error::InvalidParameter(format!(
                "oracle output length {} must be a positive multiple of 8, at least 8",
                self.output_len_bits
            )));
        }
        Ok(())
    }
}

/// Record of oracle invocations. Repeat queries are counted every time.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleTranscript {
    pub queries: Vec<(Vec<u8>, Vec<u8>)>,
    pub query_count: u64,
}

#[derive(Default)]
struct LazyTable {
    rng: Option<ChaCha20Rng>,
    entries: HashMap<(usize, Vec<u8>), Vec<u8>>,
}

/// Recorded `(input, output)` pairs.
type Record = Vec<(Vec<u8>, Vec<u8>)>;

pub struct RandomOracle {
    mode: OracleMode,
    table: Mutex<LazyTable>,
    count: AtomicU64,
    record: Option<Mutex<Record>>,
}

impl std::fmt::Debug for RandomOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RandomOracle")
            .field("mode", &self.mode)
            .field("queries", &self.query_count())
            .finish()
    }
}

impl RandomOracle {
    pub fn new(mode: OracleMode) -> Self {
        let table = match &mode {
            OracleMode::Table { rng_seed } => LazyTable {
                rng: Some(ChaCha20Rng::seed_from_u64(*rng_seed)),
                entries: HashMap::new(),
            },
            OracleMode::HashDerived { .. } => LazyTable::default(),
        };
        Self {
            mode,
            table: Mutex::new(table),
            count: AtomicU64::new(0),
            record: None,
        }
    }

    pub fn hash_derived(seed: &[u8]) -> Self {
        Self::new(OracleMode::HashDerived {
            seed: seed.to_vec(),
        })
    }

    pub fn table(rng_seed: u64) -> Self {
        Self::new(OracleMode::Table { rng_seed })
    }

    /// Keep every `(input, output)` pair in the transcript, not just the count.
    pub fn recording(mut self) -> Self {
        self.record = Some(Mutex::new(Vec::new()));
        self
    }

    pub fn mode(&self) -> &OracleMode {
        &self.mode
    }

    /// `H(input)` truncated to `out_bits` bits.
    pub fn query(&self, input: &[u8], out_bits: usize) -> Vec<u8> {
        debug_assert!(out_bits >= 8 && out_bits.is_multiple_of(8));
        debug_assert!(!input.is_empty());
        let out_len = out_bits / 8;
        let out = match &self.mode {
            OracleMode::HashDerived { seed } => {
                let mut h = Shake256::default();
                h.update(DOMAIN);
                h.update(&(out_bits as u32).to_le_bytes());
                h.update(&(seed.len() as u32).to_le_bytes());
                h.update(seed);
                h.update(input);
                let mut out = vec![0u8; out_len];
                h.finalize_xof().read(&mut out);
                out
            }
            OracleMode::Table { .. } => {
                let mut t = self.table.lock().expect("oracle table poisoned");
                let key = (out_bits, input.to_vec());
                if let Some(v) = t.entries.get(&key) {
                    v.clone()
                } else {
                    let mut out = vec![0u8; out_len];
                    t.rng.as_mut().expect("table rng").fill_bytes(&mut out);
                    t.entries.insert(key, out.clone());
                    out
                }
            }
        };
        self.count.fetch_add(1, Ordering::Relaxed);
        if let Some(rec) = &self.record {
            rec.lock()
                .expect("transcript poisoned")
                .push((input.to_vec(), out.clone()));
        }
        out
    }

    pub fn query_count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn transcript(&self) -> OracleTranscript {
        let queries = self
            .record
            .as_ref()
            .map(|r| r.lock().expect("transcript poisoned").clone())
            .unwrap_or_default();
        OracleTranscript {
            queries,
            query_count: self.query_count(),
        }
    }
}

/// One oracle at a fixed output length.
pub struct FixedOracle<'a> {
    oracle: &'a RandomOracle,
    output_len_bits: usize,
}

impl<'a> FixedOracle<'a> {
    pub fn new(oracle: &'a RandomOracle, cfg: &OracleConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            oracle,
            output_len_bits: cfg.output_len_bits,
        })
    }

    pub fn query(&self, input: &[u8]) -> Vec<u8> {
        self.oracle.query(input, self.output_len_bits)
    }
}

/// Build an oracle from a config and answer one query on it.
pub fn ro_query(oracle: &RandomOracle, cfg: &OracleConfig, input: &[u8]) -> Result<Vec<u8>> {
    cfg.validate()?;
    if input.is_empty() {
        return Err(Error::InvalidParameter("oracle input must be nonempty".into()));
    }
    Ok(oracle.query(input, cfg.output_len_bits))
}

pub fn ro_query_count(oracle: &RandomOracle) -> u64 {
    oracle.query_count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn deterministic_in_both_modes() {
        for o in [RandomOracle::hash_derived(b"s"), RandomOracle::table(3)] {
            let a = o.query(b"hello", 64);
            let b = o.query(b"hello", 64);
            assert_eq!(a, b);
            assert_eq!(a.len(), 8);
        }
    }

    #[test]
    fn hash_mode_is_stable_across_instances() {
        let a = RandomOracle::hash_derived(b"seed").query(b"x", 128);
        let b = RandomOracle::hash_derived(b"seed").query(b"x", 128);
        let c = RandomOracle::hash_derived(b"other").query(b"x", 128);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn output_lengths_are_separate_functions() {
        let o = RandomOracle::hash_derived(b"s");
        let short = o.query(b"x", 64);
        let long = o.query(b"x", 128);
        assert_ne!(short[..], long[..8]);
    }

    #[test]
    fn counts_every_invocation() {
        let o = RandomOracle::table(1).recording();
        assert_eq!(ro_query_count(&o), 0);
        o.query(b"a", 8);
        o.query(b"b", 8);
        o.query(b"c", 8);
        assert_eq!(o.query_count(), 3);
        let o = RandomOracle::table(1);
        o.query(b"a", 8);
        o.query(b"a", 8);
        o.query(b"b", 8);
        assert_eq!(o.query_count(), 3);
    }

    #[test]
    fn transcript_records_pairs() {
        let o = RandomOracle::hash_derived(b"s").recording();
        let d = o.query(b"abc", 32);
        let t = o.transcript();
        assert_eq!(t.queries, vec![(b"abc".to_vec(), d)]);
        assert_eq!(t.query_count, 1);
    }

    #[test]
    fn config_validation() {
        assert!(OracleConfig::new(0, OracleMode::Table { rng_seed: 0 }).is_err());
        assert!(OracleConfig::new(12, OracleMode::Table { rng_seed: 0 }).is_err());
        let cfg = OracleConfig::new(64, OracleMode::Table { rng_seed: 0 }).unwrap();
        let o = RandomOracle::new(cfg.mode.clone());
        assert!(ro_query(&o, &cfg, b"").is_err());
        assert_eq!(ro_query(&o, &cfg, b"z").unwrap().len(), 8);
        let fixed = FixedOracle::new(&o, &cfg).unwrap();
        assert_eq!(fixed.query(b"z"), ro_query(&o, &cfg, b"z").unwrap());
    }

    #[test]
    fn no_collisions_on_ten_thousand_inputs() {
        // Birthday bound: ~1e8 / 2^65 < 1e-11.
        for o in [RandomOracle::hash_derived(b"c"), RandomOracle::table(9)] {
            let mut seen = HashSet::new();
            for i in 0u32..10_000 {
                assert!(seen.insert(o.query(&i.to_le_bytes(), 64)));
            }
        }
    }

    #[test]
    fn table_mode_bits_are_unbiased() {
        let o = RandomOracle::table(42);
        let n = 10_000u32;
        let mut ones = [0u32; 64];
        for i in 0..n {
            let d = o.query(&i.to_le_bytes(), 64);
            for (b, c) in ones.iter_mut().enumerate() {
                *c += ((d[b / 8] >> (b % 8)) & 1) as u32;
            }
        }
        let sigma = (n as f64 * 0.25).sqrt();
        // 64 simultaneous 3-sigma checks expect ~0.17 excursions; allow up to
        // 3 (Poisson tail ~3e-5) and bound every bit at the Bonferroni level.
        let z: Vec<f64> = ones.iter().map(|&c| (c as f64 - n as f64 / 2.0).abs() / sigma).collect();
        let over3 = z.iter().filter(|&&v| v > 3.0).count();
        assert!(over3 <= 3, "{over3} bits beyond 3 sigma");
        assert!(z.iter().all(|&v| v <= 4.0), "{z:?}");
    }
}
