//! Executable security games with pluggable classical distinguishers.
//!
//! Every game is played in paired trials: trial `t` derives one seed tree and
//! runs the challenger with `b = 1` and `b = 0` from it (common random
//! numbers), so any distinguisher whose view is identical in both branches
//! scores an advantage of exactly 0. The advantage estimate is
//! `|p1 - p0|` with a 95% Wald radius
//! `1.96 sqrt(p1 (1 - p1) / n1 + p0 (1 - p0) / n0)`.
//!
//! Each trial uses its own lazily sampled table oracle. Distinguishers get
//! the oracle through [`BudgetOracle`], which enforces a query budget.
//!
//! These are classical adversaries only. The games check that the
//! construction and harness behave as expected at toy key sizes; they say
//! nothing about quantum adversaries.

use std::collections::BTreeSet;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::circuit::{CpCircuit, Gate};
use crate::delegation::{gbc_encrypt, GbcKeys, JobBundle};
use crate::encoding::{decode, gen_keys, KeySchedule};
use crate::error::{Error, Result};
use crate::garble::{closure_of, encode_phase_value, garble_circuit, GateTable};
use crate::oracle::RandomOracle;
use crate::seed::SeedTree;
use crate::sim::{RegisterLayout, SparseState};
use crate::sym::{
    cl_dec, cl_enc, cl_ver, kdmp_dec, kdmp_enc, kdmp_enc_with_pads, kdmp_keygen, kdmp_ver, ClCiphertext, CryptoParams,
    KdmpCiphertext, KeyTag, SymKey,
};

const Z95: f64 = 1.96;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub game: String,
    pub distinguisher: String,
    pub trials: u64,
    pub p1: f64,
    pub p0: f64,
    pub advantage_estimate: f64,
    pub confidence_radius: f64,
    pub oracle_queries_used: u64,
}

impl GameReport {
    fn from_counts(game: &str, distinguisher: &str, n: u64, ones1: u64, ones0: u64, queries: u64) -> Self {
        let nf = n.max(1) as f64;
        let p1 = ones1 as f64 / nf;
        let p0 = ones0 as f64 / nf;
        let radius = Z95 * (p1 * (1.0 - p1) / nf + p0 * (1.0 - p0) / nf).sqrt();
        Self {
            game: game.into(),
            distinguisher: distinguisher.into(),
            trials: 2 * n,
            p1,
            p0,
            advantage_estimate: (p1 - p0).abs(),
            confidence_radius: radius,
            oracle_queries_used: queries,
        }
    }

    pub fn consistent_with_zero(&self) -> bool {
        self.advantage_estimate <= self.confidence_radius
    }

    pub fn bounded_away_from_zero(&self) -> bool {
        self.advantage_estimate - self.confidence_radius > 0.0
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serialize")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GameConfig {
    pub kappa_bits: usize,
    /// Total trials, split evenly between `b = 1` and `b = 0`.
    pub trials: u64,
    pub seed: u64,
    pub query_budget: u64,
}

/// Oracle access for a distinguisher, cut off after `budget` queries.
pub struct BudgetOracle<'a> {
    oracle: &'a RandomOracle,
    params: CryptoParams,
    start: u64,
    budget: u64,
}

impl<'a> BudgetOracle<'a> {
    pub fn new(oracle: &'a RandomOracle, params: CryptoParams, budget: u64) -> Self {
        Self {
            oracle,
            params,
            start: oracle.query_count(),
            budget,
        }
    }

    pub fn params(&self) -> &CryptoParams {
        &self.params
    }

    pub fn used(&self) -> u64 {
        self.oracle.query_count() - self.start
    }

    pub fn remaining(&self) -> u64 {
        self.budget.saturating_sub(self.used())
    }

    fn take(&self, n: u64) -> Option<()> {
        (self.remaining() >= n).then_some(())
    }

    pub fn cl_ver(&self, k: &SymKey, index: usize, c: &ClCiphertext) -> Option<bool> {
        self.take(1)?;
        Some(cl_ver(self.oracle, &self.params, k, index, c))
    }

    pub fn cl_dec(&self, keys: [&SymKey; 3], c: &ClCiphertext) -> Option<Vec<u8>> {
        self.take(3)?;
        Some(cl_dec(self.oracle, keys, c))
    }

    pub fn kdmp_ver(&self, k: &SymKey, tag: &KeyTag) -> Option<bool> {
        self.take(1)?;
        Some(kdmp_ver(self.oracle, &self.params, k, tag))
    }

    pub fn kdmp_dec(&self, k: &SymKey, c: &KdmpCiphertext) -> Option<Vec<u8>> {
        self.take(1)?;
        Some(kdmp_dec(self.oracle, k, c))
    }
}

fn random_key(rng: &mut ChaCha20Rng, kb: usize) -> SymKey {
    let mut v = vec![0u8; kb];
    rng.fill_bytes(&mut v);
    SymKey(v)
}

/// Run `trial(b, seeds) -> (guess, queries)` on paired trials.
fn run_paired<F>(game: &str, name: &str, cfg: &GameConfig, trial: F) -> Result<GameReport>
where
    F: Fn(bool, &SeedTree) -> Result<(bool, u64)> + Sync,
{
    let pairs = cfg.trials / 2;
    if pairs == 0 {
        return Err(Error::InvalidParameter("need at least 2 trials".into()));
    }
    let root = SeedTree::new(cfg.seed);
    let results: Result<Vec<(u64, u64, u64)>> = (0..pairs)
        .into_par_iter()
        .map(|t| {
            let s = root.indexed("trial", t);
            let (g1, q1) = trial(true, &s)?;
            let (g0, q0) = trial(false, &s)?;
            Ok((g1 as u64, g0 as u64, q1 + q0))
        })
        .collect();
    let (mut ones1, mut ones0, mut q) = (0, 0, 0);
    for (a, b, c) in results? {
        ones1 += a;
        ones0 += b;
        q += c;
    }
    Ok(GameReport::from_counts(game, name, pairs, ones1, ones0, q))
}

// ---------------------------------------------------------------------------
// IND-CPA on GBC with classical inputs

/// What the IND-CPA adversary sees.
pub struct GbcView<'a> {
    pub job: &'a JobBundle,
    pub message: &'a BitString,
    /// Only set in the rigged positive-control mode.
    pub leaked: Option<&'a KeySchedule>,
}

pub trait GbcDistinguisher: Sync {
    fn name(&self) -> String;

    /// The challenge plaintext; the challenger compares it with all zeros.
    fn choose(&self, circuit: &CpCircuit) -> BitString {
        let mut m = BitString::zeros(circuit.num_inputs());
        for i in 0..circuit.num_inputs() {
            m.set(i, true);
        }
        m
    }

    fn guess(&self, view: &GbcView, oracle: &BudgetOracle, rng: &mut ChaCha20Rng) -> bool;
}

/// Key of input wire `i` in the encoded state.
fn encoded_input_key(job: &JobBundle, i: usize) -> SymKey {
    let k = job.bundle.params.kappa_bits;
    let (b, _) = job.encoded.terms().iter().next().expect("nonempty state");
    SymKey(b.get_bytes(i * k, k))
}

fn first_toffoli(job: &JobBundle) -> Option<(usize, [usize; 3])> {
    job.bundle.circuit.gates().iter().enumerate().find_map(|(i, g)| match g {
        Gate::Toffoli { inputs, .. } => Some((i, *inputs)),
        _ => None,
    })
}

pub struct ConstantGuess(pub bool);

impl GbcDistinguisher for ConstantGuess {
    fn name(&self) -> String {
        format!("constant-{}", self.0 as u8)
    }
    fn guess(&self, _: &GbcView, _: &BudgetOracle, _: &mut ChaCha20Rng) -> bool {
        self.0
    }
}

/// Tries random keys against the first tag of the first forward row; on a
/// hit it compares the found key with the given one.
pub struct TagGrinding;

impl GbcDistinguisher for TagGrinding {
    fn name(&self) -> String {
        "tag-grinding".into()
    }
    fn guess(&self, view: &GbcView, oracle: &BudgetOracle, rng: &mut ChaCha20Rng) -> bool {
        let Some((g, inputs)) = first_toffoli(view.job) else {
            return false;
        };
        let GateTable::Toffoli(t) = &view.job.bundle.tables[g] else {
            return false;
        };
        let pos = view.job.bundle.circuit.input_wires().iter().position(|&w| w == inputs[0]);
        let given = pos.map(|p| encoded_input_key(view.job, p));
        let kb = oracle.params().key_bytes();
        while let Some(ok) = oracle.cl_ver(&random_key(rng, kb), 0, &t.forward[0]) {
            if ok {
                return given.is_some_and(|k| k.as_bytes()[0] & 1 == 1);
            }
        }
        false
    }
}

/// Opens the first Toffoli with the given keys and reports which shuffled
/// row matched.
pub struct RowFrequency;

impl GbcDistinguisher for RowFrequency {
    fn name(&self) -> String {
        "row-frequency".into()
    }
    fn guess(&self, view: &GbcView, oracle: &BudgetOracle, _: &mut ChaCha20Rng) -> bool {
        let Some((g, inputs)) = first_toffoli(view.job) else {
            return false;
        };
        let GateTable::Toffoli(t) = &view.job.bundle.tables[g] else {
            return false;
        };
        let wires = view.job.bundle.circuit.input_wires();
        let keys: Option<Vec<SymKey>> = inputs
            .iter()
            .map(|w| wires.iter().position(|x| x == w).map(|p| encoded_input_key(view.job, p)))
            .collect();
        let Some(keys) = keys else {
            return false;
        };
        for (r, row) in t.forward.iter().enumerate() {
            let mut all = true;
            for (i, k) in keys.iter().enumerate() {
                match oracle.cl_ver(k, i, row) {
                    Some(true) => {}
                    _ => {
                        all = false;
                        break;
                    }
                }
            }
            if all {
                return r < 4;
            }
        }
        false
    }
}

/// Low bit of the first encoded key.
pub struct KeyLowBit;

impl GbcDistinguisher for KeyLowBit {
    fn name(&self) -> String {
        "key-low-bit".into()
    }
    fn guess(&self, view: &GbcView, _: &BudgetOracle, _: &mut ChaCha20Rng) -> bool {
        encoded_input_key(view.job, 0).as_bytes()[0] & 1 == 1
    }
}

/// Positive control: decodes with leaked keys.
pub struct LeakedKey;

impl GbcDistinguisher for LeakedKey {
    fn name(&self) -> String {
        "leaked-key".into()
    }
    fn guess(&self, view: &GbcView, _: &BudgetOracle, _: &mut ChaCha20Rng) -> bool {
        let Some(s) = view.leaked else {
            return false;
        };
        match decode(&view.job.encoded, s, &s.input_wires) {
            Ok(d) => d.terms().keys().next() == Some(view.message),
            Err(_) => false,
        }
    }
}

/// One-shot IND-CPA: the challenger encrypts the chosen classical input
/// (`b = 1`) or all zeros (`b = 0`) under fresh keys.
pub fn run_ind_cpa_gbc(
    dist: &dyn GbcDistinguisher,
    circuit: &CpCircuit,
    cfg: &GameConfig,
    leak_keys: bool,
) -> Result<GameReport> {
    let params = CryptoParams::with_kappa(cfg.kappa_bits)?;
    let message = dist.choose(circuit);
    if message.len() != circuit.num_inputs() {
        return Err(Error::InvalidParameter("message width".into()));
    }
    let game = if leak_keys { "ind-cpa-gbc-leaky" } else { "ind-cpa-gbc" };
    run_paired(game, &dist.name(), cfg, |b, s| {
        let oracle = RandomOracle::table(s.seed_u64("oracle"));
        let schedule = gen_keys(cfg.kappa_bits, circuit, &mut s.rng("keys"))?;
        let keys = GbcKeys {
            schedule,
            kappa_bits: cfg.kappa_bits,
            eta: cfg.kappa_bits,
            num_quantum: 0,
        };
        let input = if b { message.clone() } else { BitString::zeros(message.len()) };
        let state = SparseState::basis(RegisterLayout::single("q", input.len()), input)?;
        let job = gbc_encrypt(&oracle, &[], &keys, circuit, &state, &s.child("enc"))?;
        let view = GbcView {
            job: &job,
            message: &message,
            leaked: leak_keys.then_some(&keys.schedule),
        };
        let bo = BudgetOracle::new(&oracle, params, cfg.query_budget);
        let g = dist.guess(&view, &bo, &mut s.rng("adversary"));
        Ok((g, bo.used()))
    })
}

// ---------------------------------------------------------------------------
// naSymKDM on KDMP

/// `f(K) = XOR of the selected keys XOR constant`, always `kappa` bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineFn {
    pub select: Vec<usize>,
    pub constant: Vec<u8>,
}

impl AffineFn {
    pub fn eval(&self, keys: &[SymKey]) -> Vec<u8> {
        let mut out = self.constant.clone();
        for &j in &self.select {
            for (o, k) in out.iter_mut().zip(keys[j].as_bytes()) {
                *o ^= k;
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KdmQuery {
    pub key_index: usize,
    pub f: AffineFn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KdmChallenger {
    Honest,
    /// Rigged: every query under the same key reuses one mask pad.
    ReusedPad,
    /// Rigged: the distinguisher also sees every key.
    LeakKeys,
}

pub struct KdmView<'a> {
    pub queries: &'a [KdmQuery],
    pub ciphertexts: &'a [KdmpCiphertext],
    pub leaked: Option<&'a [SymKey]>,
}

pub trait KdmDistinguisher: Sync {
    fn name(&self) -> String;
    /// All queries, fixed before any answer (non-adaptive).
    fn queries(&self, num_keys: usize, key_bytes: usize) -> Vec<KdmQuery>;
    fn guess(&self, view: &KdmView, oracle: &BudgetOracle, rng: &mut ChaCha20Rng) -> bool;
}

fn self_cycle(i: usize, kb: usize) -> KdmQuery {
    KdmQuery {
        key_index: i,
        f: AffineFn {
            select: vec![i],
            constant: vec![0; kb],
        },
    }
}

pub struct KdmConstant(pub bool);

impl KdmDistinguisher for KdmConstant {
    fn name(&self) -> String {
        format!("constant-{}", self.0 as u8)
    }
    fn queries(&self, _: usize, kb: usize) -> Vec<KdmQuery> {
        vec![KdmQuery {
            key_index: 0,
            f: AffineFn {
                select: vec![],
                constant: vec![0xA5; kb],
            },
        }]
    }
    fn guess(&self, _: &KdmView, _: &BudgetOracle, _: &mut ChaCha20Rng) -> bool {
        self.0
    }
}

/// Self-cycle `Enc_{sk_0}(sk_0)` (and a two-cycle when `two_cycle`); grinds
/// key guesses against the first tag and, on a hit, checks whether the
/// ciphertext decrypts to the key itself.
pub struct KdmTagGrinding {
    pub two_cycle: bool,
}

impl KdmDistinguisher for KdmTagGrinding {
    fn name(&self) -> String {
        if self.two_cycle {
            "tag-grinding-two-cycle".into()
        } else {
            "tag-grinding-self-cycle".into()
        }
    }
    fn queries(&self, num_keys: usize, kb: usize) -> Vec<KdmQuery> {
        if self.two_cycle && num_keys >= 2 {
            let f = |j: usize| AffineFn {
                select: vec![j],
                constant: vec![0; kb],
            };
            vec![
                KdmQuery { key_index: 0, f: f(1) },
                KdmQuery { key_index: 1, f: f(0) },
            ]
        } else {
            vec![self_cycle(0, kb)]
        }
    }
    fn guess(&self, view: &KdmView, oracle: &BudgetOracle, rng: &mut ChaCha20Rng) -> bool {
        let c = &view.ciphertexts[0];
        let kb = oracle.params().key_bytes();
        while let Some(ok) = oracle.kdmp_ver(&random_key(rng, kb), &c.tag) {
            if ok {
                return true;
            }
        }
        false
    }
}

/// Asks for `sk_0` and a constant under the same key; XORs the two masked
/// payloads and tests the result as a key. Wins when pads repeat.
pub struct PadCollision;

impl KdmDistinguisher for PadCollision {
    fn name(&self) -> String {
        "pad-collision".into()
    }
    fn queries(&self, _: usize, kb: usize) -> Vec<KdmQuery> {
        vec![
            self_cycle(0, kb),
            KdmQuery {
                key_index: 0,
                f: AffineFn {
                    select: vec![],
                    constant: vec![0; kb],
                },
            },
        ]
    }
    fn guess(&self, view: &KdmView, oracle: &BudgetOracle, _: &mut ChaCha20Rng) -> bool {
        let [a, b] = [&view.ciphertexts[0], &view.ciphertexts[1]];
        let cand: Vec<u8> = a.masked.iter().zip(&b.masked).map(|(x, y)| x ^ y).collect();
        oracle.kdmp_ver(&SymKey(cand), &a.tag).unwrap_or(false)
    }
}

/// Positive control: with leaked keys, checks the first plaintext.
pub struct KdmLeakedKey;

impl KdmDistinguisher for KdmLeakedKey {
    fn name(&self) -> String {
        "leaked-key".into()
    }
    fn queries(&self, _: usize, kb: usize) -> Vec<KdmQuery> {
        vec![self_cycle(0, kb)]
    }
    fn guess(&self, view: &KdmView, oracle: &BudgetOracle, _: &mut ChaCha20Rng) -> bool {
        let Some(keys) = view.leaked else {
            return false;
        };
        let q = &view.queries[0];
        oracle
            .kdmp_dec(&keys[q.key_index], &view.ciphertexts[0])
            .is_some_and(|m| m == q.f.eval(keys))
    }
}

/// Non-adaptive symmetric KDM game on KDMP with `num_keys` keys.
pub fn run_na_sym_kdm(
    dist: &dyn KdmDistinguisher,
    num_keys: usize,
    cfg: &GameConfig,
    challenger: KdmChallenger,
) -> Result<GameReport> {
    let params = CryptoParams::with_kappa(cfg.kappa_bits)?;
    let kb = params.key_bytes();
    let queries = dist.queries(num_keys, kb);
    for q in &queries {
        if q.key_index >= num_keys || q.f.select.iter().any(|&j| j >= num_keys) || q.f.constant.len() != kb {
            return Err(Error::InvalidParameter("malformed KDM query".into()));
        }
    }
    let game = match challenger {
        KdmChallenger::Honest => "na-sym-kdm",
        KdmChallenger::ReusedPad => "na-sym-kdm-reused-pad",
        KdmChallenger::LeakKeys => "na-sym-kdm-leaky",
    };
    run_paired(game, &dist.name(), cfg, |b, s| {
        let oracle = RandomOracle::table(s.seed_u64("oracle"));
        let mut krng = s.rng("keys");
        let keys = (0..num_keys)
            .map(|_| kdmp_keygen(cfg.kappa_bits, &mut krng))
            .collect::<Result<Vec<_>>>()?;
        let mut rng = s.rng("enc");
        let shared: Vec<Vec<u8>> = (0..num_keys).map(|_| random_key(&mut rng, kb).0).collect();
        let cts: Vec<KdmpCiphertext> = queries
            .iter()
            .map(|q| {
                let m = if b { q.f.eval(&keys) } else { vec![0; kb] };
                let sk = &keys[q.key_index];
                match challenger {
                    KdmChallenger::ReusedPad => {
                        let r2 = random_key(&mut rng, kb).0;
                        kdmp_enc_with_pads(&oracle, &params, sk, &m, shared[q.key_index].clone(), r2)
                    }
                    _ => kdmp_enc(&oracle, &params, sk, &m, &mut rng),
                }
            })
            .collect();
        let view = KdmView {
            queries: &queries,
            ciphertexts: &cts,
            leaked: (challenger == KdmChallenger::LeakKeys).then_some(keys.as_slice()),
        };
        let bo = BudgetOracle::new(&oracle, params, cfg.query_budget);
        let g = dist.guess(&view, &bo, &mut s.rng("adversary"));
        Ok((g, bo.used()))
    })
}

// ---------------------------------------------------------------------------
// rG game

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RgPayload {
    Keys(Vec<usize>),
    Message(Vec<u8>),
}

/// One encryption `Enc_{S}(payload)`; `|S| = 1` uses KDMP, `|S| = 3` CL.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgPair {
    pub s: Vec<usize>,
    pub payload: RgPayload,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgInstance {
    pub num_keys: usize,
    pub pairs: Vec<RgPair>,
    pub revealed: BTreeSet<usize>,
}

impl RgInstance {
    pub fn validate(&self) -> Result<()> {
        for (j, p) in self.pairs.iter().enumerate() {
            if p.s.len() != 1 && p.s.len() != 3 {
                return Err(Error::InvalidParameter(format!("pair {j}: |S| must be 1 or 3")));
            }
            let payload_ok = match &p.payload {
                RgPayload::Keys(t) => !t.is_empty() && t.iter().all(|&k| k < self.num_keys),
                RgPayload::Message(m) => !m.is_empty(),
            };
            if !payload_ok || p.s.iter().any(|&k| k >= self.num_keys) {
                return Err(Error::InvalidParameter(format!("pair {j}: bad indices or payload")));
            }
        }
        if self.revealed.iter().any(|&k| k >= self.num_keys) {
            return Err(Error::InvalidParameter("revealed key out of range".into()));
        }
        Ok(())
    }

    pub fn closure(&self) -> BTreeSet<usize> {
        let key_pairs: Vec<(Vec<usize>, Vec<usize>)> = self
            .pairs
            .iter()
            .filter_map(|p| match &p.payload {
                RgPayload::Keys(t) => Some((p.s.clone(), t.clone())),
                RgPayload::Message(_) => None,
            })
            .collect();
        closure_of(&self.revealed, &key_pairs)
    }

    /// The garbled tables of `circuit` as pairs over keys `2 wire + bit`,
    /// revealing the input keys of `input`. Phase rows carry the fixed
    /// messages `m0 = 0`, `m1 = +-1`.
    pub fn from_circuit(circuit: &CpCircuit, input: &BitString) -> Result<Self> {
        if input.len() != circuit.num_inputs() {
            return Err(Error::InvalidParameter("input width".into()));
        }
        let id = |w: usize, b: bool| 2 * w + b as usize;
        let mut pairs = Vec::new();
        for g in circuit.gates() {
            match *g {
                Gate::Toffoli { inputs, outputs } => {
                    for t in 0..8u8 {
                        let (u, v, w) = (t & 1 == 1, t & 2 == 2, t & 4 == 4);
                        let w2 = w ^ (u && v);
                        pairs.push(RgPair {
                            s: vec![id(inputs[0], u), id(inputs[1], v), id(inputs[2], w)],
                            payload: RgPayload::Keys(vec![id(outputs[0], u), id(outputs[1], v), id(outputs[2], w2)]),
                        });
                        pairs.push(RgPair {
                            s: vec![id(outputs[0], u), id(outputs[1], v), id(outputs[2], w)],
                            payload: RgPayload::Keys(vec![id(inputs[0], u), id(inputs[1], v), id(inputs[2], w2)]),
                        });
                    }
                }
                Gate::Phase {
                    wire,
                    denom_exp,
                    negative,
                } => {
                    let modulus = 2u64 << denom_exp;
                    let m1 = if negative { modulus - 1 } else { 1 };
                    pairs.push(RgPair {
                        s: vec![id(wire, false)],
                        payload: RgPayload::Message(encode_phase_value(0, denom_exp)),
                    });
                    pairs.push(RgPair {
                        s: vec![id(wire, true)],
                        payload: RgPayload::Message(encode_phase_value(m1, denom_exp)),
                    });
                }
            }
        }
        let revealed = circuit
            .input_wires()
            .iter()
            .enumerate()
            .map(|(i, &w)| id(w, input.get(i)))
            .collect();
        Ok(Self {
            num_keys: 2 * circuit.num_wires(),
            pairs,
            revealed,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RgCiphertext {
    Single(KdmpCiphertext),
    Triple(ClCiphertext),
}

pub struct RgView<'a> {
    pub instance: &'a RgInstance,
    pub revealed: &'a [(usize, SymKey)],
    pub ciphertexts: &'a [RgCiphertext],
    pub leaked: Option<&'a [SymKey]>,
}

impl RgView<'_> {
    /// First ciphertext whose key set is not covered by `known`.
    fn first_closed(&self, known: &BTreeSet<usize>) -> Option<usize> {
        self.instance.pairs.iter().position(|p| !p.s.iter().all(|k| known.contains(k)))
    }
}

pub trait RgDistinguisher: Sync {
    fn name(&self) -> String;
    fn guess(&self, view: &RgView, oracle: &BudgetOracle, rng: &mut ChaCha20Rng) -> bool;
}

pub struct RgConstant(pub bool);

impl RgDistinguisher for RgConstant {
    fn name(&self) -> String {
        format!("constant-{}", self.0 as u8)
    }
    fn guess(&self, _: &RgView, _: &BudgetOracle, _: &mut ChaCha20Rng) -> bool {
        self.0
    }
}

/// Opens every row it can reach, then reports the parity of the first
/// masked byte of the first row it cannot open.
pub struct RgOpenAndInspect;

impl RgDistinguisher for RgOpenAndInspect {
    fn name(&self) -> String {
        "open-and-inspect".into()
    }
    fn guess(&self, view: &RgView, oracle: &BudgetOracle, _: &mut ChaCha20Rng) -> bool {
        let kb = oracle.params().key_bytes();
        let mut known: std::collections::BTreeMap<usize, SymKey> = view.revealed.iter().cloned().collect();
        loop {
            let mut grew = false;
            for (p, c) in view.instance.pairs.iter().zip(view.ciphertexts) {
                let (RgPayload::Keys(t), RgCiphertext::Triple(ct)) = (&p.payload, c) else {
                    continue;
                };
                if t.iter().all(|k| known.contains_key(k)) || !p.s.iter().all(|k| known.contains_key(k)) {
                    continue;
                }
                let keys = [&known[&p.s[0]], &known[&p.s[1]], &known[&p.s[2]]];
                let Some(m) = oracle.cl_dec(keys, ct) else {
                    break;
                };
                for (i, &k) in t.iter().enumerate() {
                    known.entry(k).or_insert_with(|| SymKey(m[i * kb..(i + 1) * kb].to_vec()));
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        let set: BTreeSet<usize> = known.keys().copied().collect();
        match view.first_closed(&set).map(|j| &view.ciphertexts[j]) {
            Some(RgCiphertext::Triple(c)) => c.masked[0] & 1 == 1,
            Some(RgCiphertext::Single(c)) => c.masked[0] & 1 == 1,
            None => false,
        }
    }
}

/// Grinds guesses against the first tag of the first unopenable row.
pub struct RgTagGrinding;

impl RgDistinguisher for RgTagGrinding {
    fn name(&self) -> String {
        "tag-grinding".into()
    }
    fn guess(&self, view: &RgView, oracle: &BudgetOracle, rng: &mut ChaCha20Rng) -> bool {
        let known: BTreeSet<usize> = view.revealed.iter().map(|r| r.0).collect();
        let Some(j) = view.first_closed(&known) else {
            return false;
        };
        let kb = oracle.params().key_bytes();
        loop {
            let k = random_key(rng, kb);
            let r = match &view.ciphertexts[j] {
                RgCiphertext::Triple(c) => oracle.cl_ver(&k, 0, c),
                RgCiphertext::Single(c) => oracle.kdmp_ver(&k, &c.tag),
            };
            match r {
                Some(true) => return true,
                Some(false) => {}
                None => return false,
            }
        }
    }
}

/// Positive control: decrypts the first row outside the closure with the
/// leaked keys and checks for a nonzero payload.
pub struct RgLeakedKey;

impl RgDistinguisher for RgLeakedKey {
    fn name(&self) -> String {
        "leaked-key".into()
    }
    fn guess(&self, view: &RgView, oracle: &BudgetOracle, _: &mut ChaCha20Rng) -> bool {
        let Some(keys) = view.leaked else {
            return false;
        };
        let closure = view.instance.closure();
        let Some(j) = view.first_closed(&closure) else {
            return false;
        };
        let p = &view.instance.pairs[j];
        let m = match &view.ciphertexts[j] {
            RgCiphertext::Triple(c) => oracle.cl_dec([&keys[p.s[0]], &keys[p.s[1]], &keys[p.s[2]]], c),
            RgCiphertext::Single(c) => oracle.kdmp_dec(&keys[p.s[0]], c),
        };
        m.is_some_and(|m| m.iter().any(|&x| x != 0))
    }
}

/// The rG challenger: row `j` encrypts its real payload when `b = 1` or
/// when `S_j` lies inside `Closure(Rev)`, and zeros of the same length
/// otherwise.
pub fn run_rg_game(
    dist: &dyn RgDistinguisher,
    instance: &RgInstance,
    cfg: &GameConfig,
    leak_keys: bool,
) -> Result<GameReport> {
    instance.validate()?;
    let params = CryptoParams::with_kappa(cfg.kappa_bits)?;
    let closure = instance.closure();
    let game = if leak_keys { "rg-leaky" } else { "rg" };
    run_paired(game, &dist.name(), cfg, |b, s| {
        let oracle = RandomOracle::table(s.seed_u64("oracle"));
        let mut krng = s.rng("keys");
        let keys = (0..instance.num_keys)
            .map(|_| kdmp_keygen(cfg.kappa_bits, &mut krng))
            .collect::<Result<Vec<_>>>()?;
        let mut rng = s.rng("enc");
        let cts: Vec<RgCiphertext> = instance
            .pairs
            .iter()
            .map(|p| {
                let real: Vec<u8> = match &p.payload {
                    RgPayload::Keys(t) => t.iter().flat_map(|&k| keys[k].0.iter().copied()).collect(),
                    RgPayload::Message(m) => m.clone(),
                };
                let m = if b || p.s.iter().all(|k| closure.contains(k)) { real } else { vec![0; real.len()] };
                if p.s.len() == 1 {
                    RgCiphertext::Single(kdmp_enc(&oracle, &params, &keys[p.s[0]], &m, &mut rng))
                } else {
                    RgCiphertext::Triple(cl_enc(&oracle, &params, [&keys[p.s[0]], &keys[p.s[1]], &keys[p.s[2]]], &m, &mut rng))
                }
            })
            .collect();
        let revealed: Vec<(usize, SymKey)> = instance.revealed.iter().map(|&k| (k, keys[k].clone())).collect();
        let view = RgView {
            instance,
            revealed: &revealed,
            ciphertexts: &cts,
            leaked: leak_keys.then_some(keys.as_slice()),
        };
        let bo = BudgetOracle::new(&oracle, params, cfg.query_budget);
        let g = dist.guess(&view, &bo, &mut s.rng("adversary"));
        Ok((g, bo.used()))
    })
}

// ---------------------------------------------------------------------------
// Key recovery

pub struct KeyRecoveryView<'a> {
    pub circuit: &'a CpCircuit,
    pub tables: &'a [GateTable],
    pub input: &'a BitString,
    /// Keys of `input`, one per input wire in order.
    pub input_keys: &'a [SymKey],
    /// Input position whose other key must be produced.
    pub target: usize,
}

pub trait KeyGuesser: Sync {
    fn name(&self) -> String;
    fn guess(&self, view: &KeyRecoveryView, oracle: &BudgetOracle, rng: &mut ChaCha20Rng) -> Option<SymKey>;
}

pub struct RandomGuess;

impl KeyGuesser for RandomGuess {
    fn name(&self) -> String {
        "random-guess".into()
    }
    fn guess(&self, view: &KeyRecoveryView, _: &BudgetOracle, rng: &mut ChaCha20Rng) -> Option<SymKey> {
        Some(random_key(rng, view.input_keys[0].as_bytes().len()))
    }
}

/// Returns the key it was given; always wrong because the target differs.
pub struct ReplayRevealed;

impl KeyGuesser for ReplayRevealed {
    fn name(&self) -> String {
        "replay-revealed".into()
    }
    fn guess(&self, view: &KeyRecoveryView, _: &BudgetOracle, _: &mut ChaCha20Rng) -> Option<SymKey> {
        Some(view.input_keys[view.target].clone())
    }
}

/// Exhaustive search over the target wire's other key against the tags of
/// the gate consuming it.
pub struct BruteForce;

impl KeyGuesser for BruteForce {
    fn name(&self) -> String {
        "brute-force".into()
    }
    fn guess(&self, view: &KeyRecoveryView, oracle: &BudgetOracle, _: &mut ChaCha20Rng) -> Option<SymKey> {
        let kb = view.input_keys[0].as_bytes().len();
        if kb > 2 {
            return None;
        }
        let wires = view.circuit.input_wires();
        let tw = wires[view.target];
        let (g, inputs) = view.circuit.gates().iter().enumerate().find_map(|(i, g)| match g {
            Gate::Toffoli { inputs, .. } if inputs.contains(&tw) => Some((i, *inputs)),
            _ => None,
        })?;
        let GateTable::Toffoli(t) = &view.tables[g] else {
            return None;
        };
        let slot = inputs.iter().position(|&w| w == tw)?;
        let given: Vec<Option<&SymKey>> = inputs
            .iter()
            .map(|w| wires.iter().position(|x| x == w).map(|p| &view.input_keys[p]))
            .collect();
        // Rows whose other two tags accept the known keys; one of them is
        // the row for the flipped target bit.
        let mut rows = Vec::new();
        for row in &t.forward {
            let mut ok = true;
            for (i, k) in given.iter().enumerate() {
                if i == slot {
                    continue;
                }
                match k {
                    Some(k) if oracle.cl_ver(k, i, row)? => {}
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && !oracle.cl_ver(&view.input_keys[view.target], slot, row)? {
                rows.push(row);
            }
        }
        let row = rows.first()?;
        let known = &view.input_keys[view.target];
        for v in 0..1u32 << (8 * kb) {
            let cand = SymKey(v.to_le_bytes()[..kb].to_vec());
            if &cand == known {
                continue;
            }
            if oracle.cl_ver(&cand, slot, row)? {
                return Some(cand);
            }
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyRecoveryReport {
    pub guesser: String,
    pub kappa_bits: usize,
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    pub oracle_queries_used: u64,
}

/// Give the guesser a garbled circuit and the input keys of a random input
/// `i`; it wins by producing the key of input `j`, which differs from `i`
/// only at position `target`.
pub fn key_recovery_experiment(
    circuit: &CpCircuit,
    guesser: &dyn KeyGuesser,
    kappa_bits: usize,
    trials: u64,
    seed: u64,
    query_budget: u64,
    target: usize,
) -> Result<KeyRecoveryReport> {
    if target >= circuit.num_inputs() {
        return Err(Error::InvalidParameter("target input out of range".into()));
    }
    let params = CryptoParams::with_kappa(kappa_bits)?;
    let root = SeedTree::new(seed);
    let results: Result<Vec<(bool, u64)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = root.indexed("trial", t);
            let oracle = RandomOracle::table(s.seed_u64("oracle"));
            let schedule = gen_keys(kappa_bits, circuit, &mut s.rng("keys"))?;
            let bundle = garble_circuit(&oracle, &params, circuit, &schedule, &s.child("garble"))?;
            let mut r = s.rng("input");
            let mut input = BitString::zeros(circuit.num_inputs());
            for i in 0..input.len() {
                input.set(i, r.gen());
            }
            let wires = circuit.input_wires();
            let keys: Vec<SymKey> = wires
                .iter()
                .enumerate()
                .map(|(i, &w)| schedule.pairs[w].key(input.get(i)).clone())
                .collect();
            let want = schedule.pairs[wires[target]].key(!input.get(target));
            let view = KeyRecoveryView {
                circuit,
                tables: &bundle.tables,
                input: &input,
                input_keys: &keys,
                target,
            };
            let bo = BudgetOracle::new(&oracle, params, query_budget);
            let g = guesser.guess(&view, &bo, &mut s.rng("adversary"));
            Ok((g.as_ref() == Some(want), bo.used()))
        })
        .collect();
    let results = results?;
    let successes = results.iter().filter(|r| r.0).count() as u64;
    Ok(KeyRecoveryReport {
        guesser: guesser.name(),
        kappa_bits,
        trials,
        successes,
        success_rate: successes as f64 / trials.max(1) as f64,
        oracle_queries_used: results.iter().map(|r| r.1).sum(),
    })
}
