//! End-to-end delegation.
//!
//! The client samples a key schedule, encodes its input, garbles the public
//! circuit and ships a [`JobBundle`]. The server runs [`server_eval`] and
//! returns an [`EncodedResult`], which only the client can decode.
//!
//! Key length defaults to `kappa = eta + 4 N_q` (rounded up to a byte) where
//! `N_q` counts the inputs that carry superpositions; [`KappaMode::Eta`]
//! uses `kappa = eta` instead.

use num_complex::Complex64;
use rand::{CryptoRng, Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::circuit::{universalize, CpCircuit, LogicalBuilder};
use crate::encoding::{cnot_cost, decode, encode, gen_keys, CostReport, KeySchedule};
use crate::error::{Error, Result};
use crate::evaluate::{eval_bundle, EvalStats};
use crate::garble::{garble_circuit, GarbledBundle};
use crate::oracle::RandomOracle;
use crate::seed::SeedTree;
use crate::sim::{density_average, qft_gate_count, DensityMatrix, RegisterLayout, SparseState};
use crate::sym::{kdmp_dec, kdmp_enc, CryptoParams, KdmpCiphertext, SymKey};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KappaMode {
    /// `kappa = eta + 4 N_q`.
    Margin,
    /// `kappa = eta`.
    Eta,
}

pub fn kappa_for(eta: usize, num_quantum: usize, mode: KappaMode) -> usize {
    let raw = match mode {
        KappaMode::Margin => eta + 4 * num_quantum,
        KappaMode::Eta => eta,
    };
    raw.div_ceil(8).max(1) * 8
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GbcKeys {
    pub schedule: KeySchedule,
    pub kappa_bits: usize,
    pub eta: usize,
    pub num_quantum: usize,
}

pub fn gbc_keygen<R: RngCore + CryptoRng + ?Sized>(
    eta: usize,
    num_quantum: usize,
    circuit: &CpCircuit,
    mode: KappaMode,
    rng: &mut R,
) -> Result<GbcKeys> {
    if eta == 0 {
        return Err(Error::InvalidParameter("eta must be positive".into()));
    }
    let kappa = kappa_for(eta, num_quantum, mode);
    Ok(GbcKeys {
        schedule: gen_keys(kappa, circuit, rng)?,
        kappa_bits: kappa,
        eta,
        num_quantum,
    })
}

/// Everything the server needs: encoded input, garbled tables, the public
/// circuit (inside the bundle) and the public oracle seed.
#[derive(Clone, Debug, PartialEq)]
pub struct JobBundle {
    pub oracle_seed: Vec<u8>,
    pub encoded: SparseState,
    pub bundle: GarbledBundle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedResult {
    pub state: SparseState,
    pub stats: EvalStats,
}

/// Encode `input` (bit `i` = logical input `i`) and garble the circuit.
pub fn gbc_encrypt(
    oracle: &RandomOracle,
    oracle_seed: &[u8],
    keys: &GbcKeys,
    circuit: &CpCircuit,
    input: &SparseState,
    seeds: &SeedTree,
) -> Result<JobBundle> {
    if input.layout().total_bits() != circuit.num_inputs() {
        return Err(Error::LayoutMismatch(format!(
            "input has {} bits, circuit has {} inputs",
            input.layout().total_bits(),
            circuit.num_inputs()
        )));
    }
    let params = CryptoParams::with_kappa(keys.kappa_bits)?;
    let encoded = encode(input, &keys.schedule, &keys.schedule.input_wires)?;
    let bundle = garble_circuit(oracle, &params, circuit, &keys.schedule, &seeds.child("garble"))?;
    Ok(JobBundle {
        oracle_seed: oracle_seed.to_vec(),
        encoded,
        bundle,
    })
}

/// The server's whole job.
pub fn server_eval(oracle: &RandomOracle, job: &JobBundle) -> Result<EncodedResult> {
    let (state, stats) = eval_bundle(oracle, &job.bundle, &job.encoded)?;
    Ok(EncodedResult { state, stats })
}

pub fn gbc_decrypt(keys: &GbcKeys, result: &EncodedResult) -> Result<SparseState> {
    decode(&result.state, &keys.schedule, &keys.schedule.output_wires)
}

/// Product state from a string over `0`, `1`, `+`, `-`; character `i` is
/// qubit `i`.
pub fn product_state(spec: &str) -> Result<SparseState> {
    let chars: Vec<char> = spec.chars().filter(|c| !c.is_whitespace()).collect();
    let n = chars.len();
    if n == 0 || n > 24 {
        return Err(Error::InvalidParameter("input spec must have 1..=24 qubits".into()));
    }
    let mut terms = vec![(BitString::zeros(n), Complex64::new(1.0, 0.0))];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for (i, c) in chars.iter().enumerate() {
        let (a0, a1) = match c {
            '0' => (Some(1.0), None),
            '1' => (None, Some(1.0)),
            '+' => (Some(h), Some(h)),
            '-' | '\u{2212}' => (Some(h), Some(-h)),
            other => return Err(Error::InvalidParameter(format!("bad input character {other:?}"))),
        };
        let mut next = Vec::with_capacity(terms.len() * 2);
        for (b, a) in &terms {
            if let Some(x) = a0 {
                next.push((b.clone(), a * x));
            }
            if let Some(x) = a1 {
                let mut b = b.clone();
                b.set(i, true);
                next.push((b, a * x));
            }
        }
        terms = next;
    }
    SparseState::from_terms(RegisterLayout::single("q", n), terms)
}

/// Client-side quantum work for one delegation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientCost {
    /// CNOTs and X gates to encode the quantum inputs.
    pub encoding: CostReport,
    /// X gates to prepare classical inputs directly as keys.
    pub classical_x: u64,
    /// CNOTs to undo the encoding on the quantum outputs.
    pub decoding_cnots: u64,
    /// Gates of the client's own QFT, if any.
    pub qft_gates: u64,
}

fn classical_x(schedule: &KeySchedule, wires: &[(usize, bool)]) -> Result<u64> {
    let mut x = 0;
    for &(w, b) in wires {
        x += schedule.pair(w)?.key(b).as_bytes().iter().map(|b| b.count_ones() as u64).sum::<u64>();
    }
    Ok(x)
}

#[derive(Clone, Debug)]
pub struct BlindRun {
    pub output: SparseState,
    pub job: JobBundle,
    pub stats: EvalStats,
}

/// Delegate `c` through the universal machine for `(N, max_gates, D)`: the
/// server only ever sees the machine, and `c`'s description enters as
/// classically encoded input wires.
#[allow(clippy::too_many_arguments)]
pub fn blind_delegate(
    oracle: &RandomOracle,
    oracle_seed: &[u8],
    kappa_bits: usize,
    c: &CpCircuit,
    input: &SparseState,
    max_gates: usize,
    max_denom_exp: u32,
    seeds: &SeedTree,
) -> Result<BlindRun> {
    let n = c.num_inputs();
    let (machine, desc) = universalize(c, n, max_denom_exp, max_gates)?;
    let u = machine.circuit();
    let full = machine.embed(input, &desc)?;
    let keys = GbcKeys {
        schedule: gen_keys(kappa_bits, u, &mut seeds.rng("keys"))?,
        kappa_bits,
        eta: kappa_bits,
        num_quantum: n,
    };
    let job = gbc_encrypt(oracle, oracle_seed, &keys, u, &full, seeds)?;
    let result = server_eval(oracle, &job)?;
    let out = gbc_decrypt(&keys, &result)?;
    Ok(BlindRun {
        output: machine.extract(&out, &desc)?,
        job,
        stats: result.stats,
    })
}

/// Toffoli-only circuit for `|x>|1> -> |x>|a^x mod M>` and its qubit map.
#[derive(Clone, Debug)]
pub struct ModExp {
    pub modulus: u64,
    pub base: u64,
    pub n_exp: usize,
    pub work_bits: usize,
    pub circuit: CpCircuit,
    /// Qubits `0..n_exp` hold `x`, the next `work_bits` hold the work
    /// register, then two constant-1 qubits, then zeroed ancillas.
    pub ones: [usize; 2],
    pub ancillas: Vec<usize>,
}

impl ModExp {
    pub fn work_range(&self) -> std::ops::Range<usize> {
        self.n_exp..self.n_exp + self.work_bits
    }

    /// Classical values of every non-exponent input qubit.
    pub fn classical_inputs(&self) -> Vec<(usize, bool)> {
        let mut v = Vec::new();
        for (j, q) in self.work_range().enumerate() {
            v.push((q, j == 0));
        }
        v.push((self.ones[0], true));
        v.push((self.ones[1], true));
        for &q in &self.ancillas {
            v.push((q, false));
        }
        v
    }

    /// `|+>^{n_exp}` on the exponent with the classical inputs set.
    pub fn input_state(&self) -> Result<SparseState> {
        let n = self.circuit.num_inputs();
        let mut base = BitString::zeros(n);
        for (q, b) in self.classical_inputs() {
            base.set(q, b);
        }
        let amp = Complex64::new((0.5f64).powf(self.n_exp as f64 / 2.0), 0.0);
        let terms = (0..1u64 << self.n_exp).map(|x| {
            let mut b = base.clone();
            b.set_u64(0, self.n_exp, x);
            (b, amp)
        });
        SparseState::from_terms(RegisterLayout::single("q", n), terms)
    }
}

pub fn mod_pow(base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    let mut b = base % m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    acc
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn bits_for(m: u64) -> usize {
    (u64::BITS - (m - 1).leading_zeros()) as usize
}

/// Transpositions whose left-to-right application realizes `perm`.
fn transpositions(perm: &[usize]) -> Vec<(usize, usize)> {
    let mut seen = vec![false; perm.len()];
    let mut out = Vec::new();
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut cycle = vec![start];
        seen[start] = true;
        let mut y = perm[start];
        while y != start {
            seen[y] = true;
            cycle.push(y);
            y = perm[y];
        }
        for &y in &cycle[1..] {
            out.push((cycle[0], y));
        }
    }
    out
}

/// Controlled swap of basis values `p` and `q` of `reg`.
fn controlled_transposition(b: &mut LogicalBuilder, control: usize, reg: &[usize], p: usize, q: usize, ancillas: &[usize]) {
    let diff = p ^ q;
    let t = diff.trailing_zeros() as usize;
    let others: Vec<usize> = (0..reg.len()).filter(|&j| j != t && (diff >> j) & 1 == 1).collect();
    for &j in &others {
        b.cnot(reg[t], reg[j]);
    }
    // After the CNOTs, p and q differ only in bit t.
    let p2 = if (p >> t) & 1 == 1 { p ^ (diff & !(1 << t)) } else { p };
    let mut controls = vec![(control, true)];
    for (j, &r) in reg.iter().enumerate() {
        if j != t {
            controls.push((r, (p2 >> j) & 1 == 1));
        }
    }
    b.mcx(&controls, reg[t], ancillas);
    for &j in others.iter().rev() {
        b.cnot(reg[t], reg[j]);
    }
}

/// Modular exponentiation by `base` mod `modulus` from per-exponent-bit
/// controlled multiplications, each split into cycles and transpositions.
/// Values `y >= modulus` of the work register are left fixed.
pub fn synth_modexp_toffoli(modulus: u64, base: u64, n_exp: usize) -> Result<ModExp> {
    if !(2..=64).contains(&modulus) {
        return Err(Error::InvalidParameter(format!("modulus {modulus} outside 2..=64")));
    }
    if gcd(base, modulus) != 1 {
        return Err(Error::InvalidParameter(format!("gcd({base}, {modulus}) != 1")));
    }
    if n_exp == 0 || n_exp > 20 {
        return Err(Error::InvalidParameter("exponent width must be 1..=20".into()));
    }
    let m = bits_for(modulus).max(1);
    let mut b = LogicalBuilder::new(n_exp + m);
    let ones_v = b.alloc(2);
    let ones = [ones_v[0], ones_v[1]];
    b.set_constants(ones[0], ones[1]);
    let ancillas = b.alloc(m);
    let reg: Vec<usize> = (n_exp..n_exp + m).collect();
    for i in 0..n_exp {
        let c = mod_pow(base, 1u64 << i, modulus);
        if c == 1 {
            continue;
        }
        let perm: Vec<usize> = (0..1usize << m)
            .map(|y| if (y as u64) < modulus { (c * y as u64 % modulus) as usize } else { y })
            .collect();
        for (p, q) in transpositions(&perm) {
            controlled_transposition(&mut b, i, &reg, p, q, &ancillas);
        }
    }
    let circuit = b.build().map_err(|e| Error::Build(e.to_string()))?;
    Ok(ModExp {
        modulus,
        base,
        n_exp,
        work_bits: m,
        circuit,
        ones,
        ancillas,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShorOutcome {
    pub measured: u64,
    pub work_value: u64,
    pub period: Option<u64>,
    pub factor: Option<u64>,
}

/// Client post-processing on the decoded (or directly simulated) output:
/// measure the work register, QFT the exponent register, measure it and
/// run continued fractions.
pub fn shor_postprocess<R: Rng + ?Sized>(me: &ModExp, output: &SparseState, rng: &mut R) -> Result<ShorOutcome> {
    let n = me.circuit.num_inputs();
    let mut regs: Vec<(String, usize)> = vec![("x".into(), me.n_exp), ("y".into(), me.work_bits)];
    let rest = n - me.n_exp - me.work_bits;
    if rest > 0 {
        regs.push(("rest".into(), rest));
    }
    let mut s = output.clone();
    s.relabel(RegisterLayout::new(regs)?)?;
    let (y, _) = s.measure_register("y", rng)?;
    s.qft("x")?;
    let (x, _) = s.measure_register("x", rng)?;
    let measured = x.to_u64();
    let period = find_period(measured, me.n_exp, me.base, me.modulus);
    let factor = period.and_then(|r| factor_from_period(me.base, r, me.modulus));
    Ok(ShorOutcome {
        measured,
        work_value: y.to_u64(),
        period,
        factor,
    })
}

/// Smallest `r` among continued-fraction denominators of `s / 2^n` (and
/// their small multiples) with `a^r = 1 mod M`.
pub fn find_period(s: u64, n: usize, a: u64, m: u64) -> Option<u64> {
    let q = 1u64 << n;
    let mut cands = Vec::new();
    let (mut num, mut den) = (s, q);
    let (mut h0, mut h1, mut k0, mut k1) = (0u64, 1u64, 1u64, 0u64);
    while den != 0 {
        let t = num / den;
        (num, den) = (den, num % den);
        let h2 = t * h1 + h0;
        let k2 = t * k1 + k0;
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if k1 > m {
            break;
        }
        cands.push(k1);
    }
    let mut best: Option<u64> = None;
    for r in cands {
        for mult in 1..=4u64 {
            let rr = r * mult;
            if rr >= 1 && rr <= m && mod_pow(a, rr, m) == 1 {
                best = Some(best.map_or(rr, |b| b.min(rr)));
            }
        }
    }
    best
}

pub fn factor_from_period(a: u64, r: u64, m: u64) -> Option<u64> {
    if !r.is_multiple_of(2) {
        return None;
    }
    let h = mod_pow(a, r / 2, m);
    if h == m - 1 {
        return None;
    }
    [gcd(h + 1, m), gcd(h + m - 1, m)]
        .into_iter()
        .find(|&f| f > 1 && f < m)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShorCost {
    pub n_exp: usize,
    pub kappa_bits: usize,
    pub toffolis: usize,
    /// Client QFT gates on the exponent register.
    pub qft_gates: u64,
    /// Encoding CNOTs for the `|+>` exponent wires.
    pub encoding_cnots: u64,
    /// X gates for all encodings, quantum and classical.
    pub encoding_x: u64,
    pub decoding_cnots: u64,
}

#[derive(Clone, Debug)]
pub struct ShorRun {
    pub setup: ModExp,
    pub output: SparseState,
    pub cost: ShorCost,
    pub stats: EvalStats,
}

pub fn check_shor_modulus(m: u64, a: u64) -> Result<()> {
    if m.is_multiple_of(2) || !(9..=64).contains(&m) {
        return Err(Error::InvalidParameter(format!("modulus {m} must be odd and in 9..=64")));
    }
    if (2..m).all(|d| d * d > m || !m.is_multiple_of(d)) {
        return Err(Error::InvalidParameter(format!("modulus {m} is prime")));
    }
    if a < 2 || a >= m || gcd(a, m) != 1 {
        return Err(Error::InvalidParameter(format!("base {a} must be in 2..{m} and coprime to it")));
    }
    Ok(())
}

/// Build the modular-exponentiation circuit for `M` and delegate it. The
/// decoded output is returned for [`shor_postprocess`].
pub fn shor_delegate(oracle: &RandomOracle, oracle_seed: &[u8], m: u64, a: u64, eta: usize, mode: KappaMode, seeds: &SeedTree) -> Result<ShorRun> {
    check_shor_modulus(m, a)?;
    let n_exp = 2 * bits_for(m);
    let setup = synth_modexp_toffoli(m, a, n_exp)?;
    let keys = gbc_keygen(eta, n_exp, &setup.circuit, mode, &mut seeds.rng("keys"))?;
    let input = setup.input_state()?;
    let job = gbc_encrypt(oracle, oracle_seed, &keys, &setup.circuit, &input, seeds)?;
    let result = server_eval(oracle, &job)?;
    let output = gbc_decrypt(&keys, &result)?;
    let sched = &keys.schedule;
    let x_wires: Vec<usize> = (0..n_exp).map(|q| sched.input_wires[q]).collect();
    let x_out: Vec<usize> = (0..n_exp).map(|q| sched.output_wires[q]).collect();
    let classical: Vec<(usize, bool)> = setup.classical_inputs().into_iter().map(|(q, b)| (sched.input_wires[q], b)).collect();
    let enc = cnot_cost(sched, &x_wires)?;
    let cost = ShorCost {
        n_exp,
        kappa_bits: keys.kappa_bits,
        toffolis: setup.circuit.toffoli_count(),
        qft_gates: qft_gate_count(n_exp) as u64,
        encoding_cnots: enc.cnot_count,
        encoding_x: enc.x_count + classical_x(sched, &classical)?,
        decoding_cnots: cnot_cost(sched, &x_out)?.cnot_count,
    };
    Ok(ShorRun {
        setup,
        output,
        cost,
        stats: result.stats,
    })
}

/// The same circuit run by the direct logical simulator.
pub fn shor_direct(m: u64, a: u64) -> Result<(ModExp, SparseState)> {
    check_shor_modulus(m, a)?;
    let setup = synth_modexp_toffoli(m, a, 2 * bits_for(m))?;
    let out = setup.circuit.simulate(&setup.input_state()?)?;
    Ok((setup, out))
}

/// `(X^a Z^b rho, KDMP.Enc_sk(a || b))`.
#[derive(Clone, Debug, PartialEq)]
pub struct QkdmCiphertext {
    pub padded: SparseState,
    pub otp: KdmpCiphertext,
}

fn mask_bytes(n: usize) -> usize {
    n.div_ceil(8)
}

pub fn qkdm_enc<R: RngCore + ?Sized>(
    oracle: &RandomOracle,
    params: &CryptoParams,
    sk: &SymKey,
    state: &SparseState,
    rng: &mut R,
) -> Result<QkdmCiphertext> {
    let n = state.layout().total_bits();
    let nb = mask_bytes(n);
    let mut ab = vec![0u8; 2 * nb];
    rng.fill_bytes(&mut ab);
    let a = BitString::from_bytes(&ab[..nb], n);
    let b = BitString::from_bytes(&ab[nb..], n);
    // Store canonical (masked-off) bytes so decryption recovers them exactly.
    let mut payload = a.to_bytes();
    payload.extend(b.to_bytes());
    let mut padded = state.clone();
    padded.pauli_frame(&a, &b)?;
    Ok(QkdmCiphertext {
        padded,
        otp: kdmp_enc(oracle, params, sk, &payload, rng),
    })
}

pub fn qkdm_dec(oracle: &RandomOracle, sk: &SymKey, ct: &QkdmCiphertext) -> Result<SparseState> {
    let n = ct.padded.layout().total_bits();
    let nb = mask_bytes(n);
    let payload = kdmp_dec(oracle, sk, &ct.otp);
    if payload.len() != 2 * nb {
        return Err(Error::Malformed("QKDM pad length".into()));
    }
    let a = BitString::from_bytes(&payload[..nb], n);
    let b = BitString::from_bytes(&payload[nb..], n);
    let zero = BitString::zeros(n);
    let mut s = ct.padded.clone();
    // (X^a Z^b)^{-1} = Z^b X^a.
    s.pauli_frame(&a, &zero)?;
    s.pauli_frame(&zero, &b)?;
    Ok(s)
}

/// Uniform average of `X^a Z^b |psi><psi| Z^b X^a` over every `(a, b)`.
pub fn qotp_average(state: &SparseState) -> Result<DensityMatrix> {
    let n = state.layout().total_bits();
    if n > 6 {
        return Err(Error::DimensionOverflow(format!("{n}-bit pad enumeration")));
    }
    let count = 1u64 << (2 * n);
    let w = 1.0 / count as f64;
    let mut states = Vec::with_capacity(count as usize);
    for v in 0..count {
        let a = BitString::from_u64(v & ((1 << n) - 1), n);
        let b = BitString::from_u64(v >> n, n);
        let mut s = state.clone();
        s.pauli_frame(&a, &b)?;
        states.push((w, s));
    }
    density_average(&states)
}
