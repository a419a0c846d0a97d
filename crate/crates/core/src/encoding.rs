//! The key encoding `E~: |0> -> |k0>, |1> -> |k1>`.
//!
//! Wire `l` of an encoded state lives in a `kappa`-bit register named
//! `w{l}`; key bytes are laid out little-endian (byte 0 holds bits 0..8).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::circuit::CpCircuit;
use crate::error::{Error, Result};
use crate::sim::{trace_distance, DensityMatrix, RegisterLayout, SparseState, MAX_DENSITY_QUBITS};
use crate::sym::{kdmp_keygen, SymKey};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireKeyPair {
    pub k0: SymKey,
    pub k1: SymKey,
}

impl WireKeyPair {
    pub fn key(&self, bit: bool) -> &SymKey {
        if bit {
            &self.k1
        } else {
            &self.k0
        }
    }

    /// Which logical value `bytes` encodes, if any.
    pub fn bit_of(&self, bytes: &[u8]) -> Option<bool> {
        if bytes == self.k0.as_bytes() {
            Some(false)
        } else if bytes == self.k1.as_bytes() {
            Some(true)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeySchedule {
    pub kappa_bits: usize,
    pub pairs: Vec<WireKeyPair>,
    pub input_wires: Vec<usize>,
    pub output_wires: Vec<usize>,
}

impl KeySchedule {
    pub fn pair(&self, wire: usize) -> Result<&WireKeyPair> {
        self.pairs
            .get(wire)
            .ok_or_else(|| Error::InvalidParameter(format!("no keys for wire {wire}")))
    }

    /// Rebuild from parts, checking widths and per-pair distinctness.
    pub fn from_parts(
        kappa_bits: usize,
        pairs: Vec<WireKeyPair>,
        input_wires: Vec<usize>,
        output_wires: Vec<usize>,
    ) -> Result<Self> {
        if kappa_bits == 0 || !kappa_bits.is_multiple_of(8) {
            return Err(Error::KeyNotByteAligned(kappa_bits));
        }
        for (l, p) in pairs.iter().enumerate() {
            if p.k0.len_bits() != kappa_bits || p.k1.len_bits() != kappa_bits {
                return Err(Error::Malformed(format!("wire {l}: key length")));
            }
            if p.k0 == p.k1 {
                return Err(Error::Malformed(format!("wire {l}: k0 = k1")));
            }
        }
        if input_wires.iter().chain(&output_wires).any(|&w| w >= pairs.len()) {
            return Err(Error::Malformed("wire index beyond schedule".into()));
        }
        Ok(Self {
            kappa_bits,
            pairs,
            input_wires,
            output_wires,
        })
    }
}

pub fn wire_register(wire: usize) -> String {
    format!("w{wire}")
}

/// Layout of an encoded state over `wires`, in order.
pub fn encoded_layout(kappa_bits: usize, wires: &[usize]) -> Result<RegisterLayout> {
    RegisterLayout::new(wires.iter().map(|&w| (wire_register(w), kappa_bits)))
}

/// Independent uniform key pairs for every wire of `circuit`.
pub fn gen_keys<R: RngCore + CryptoRng + ?Sized>(
    kappa_bits: usize,
    circuit: &CpCircuit,
    rng: &mut R,
) -> Result<KeySchedule> {
    let mut pairs = Vec::with_capacity(circuit.num_wires());
    for _ in 0..circuit.num_wires() {
        let k0 = kdmp_keygen(kappa_bits, rng)?;
        let k1 = loop {
            let k = kdmp_keygen(kappa_bits, rng)?;
            if k != k0 {
                break k;
            }
        };
        pairs.push(WireKeyPair { k0, k1 });
    }
    Ok(KeySchedule {
        kappa_bits,
        pairs,
        input_wires: circuit.input_wires(),
        output_wires: circuit.output_wires().to_vec(),
    })
}

/// Replace logical bit `i` of every term by the key of `wires[i]`.
pub fn encode(logical: &SparseState, schedule: &KeySchedule, wires: &[usize]) -> Result<SparseState> {
    if logical.layout().total_bits() != wires.len() {
        return Err(Error::LayoutMismatch(format!(
            "{} logical bits for {} wires",
            logical.layout().total_bits(),
            wires.len()
        )));
    }
    let k = schedule.kappa_bits;
    let pairs = wires.iter().map(|&w| schedule.pair(w)).collect::<Result<Vec<_>>>()?;
    let layout = encoded_layout(k, wires)?;
    let total = layout.total_bits();
    let terms = logical.terms().iter().map(|(b, a)| {
        let mut out = BitString::zeros(total);
        for (i, p) in pairs.iter().enumerate() {
            out.set_bytes(i * k, k, p.key(b.get(i)).as_bytes());
        }
        (out, *a)
    });
    SparseState::from_terms(layout, terms)
}

/// Inverse of [`encode`]: the result has one register `q` with bit `i`
/// holding wire `wires[i]`.
pub fn decode(encoded: &SparseState, schedule: &KeySchedule, wires: &[usize]) -> Result<SparseState> {
    let k = schedule.kappa_bits;
    if encoded.layout().total_bits() != wires.len() * k {
        return Err(Error::LayoutMismatch("encoded width does not match wires".into()));
    }
    let mut located = Vec::with_capacity(wires.len());
    for &w in wires {
        let (off, width) = encoded.layout().locate(&wire_register(w))?;
        if width != k {
            return Err(Error::LayoutMismatch(format!("register for wire {w} is {width} bits")));
        }
        located.push((w, off, schedule.pair(w)?));
    }
    let mut terms = Vec::with_capacity(encoded.num_terms());
    for (b, a) in encoded.terms() {
        let mut out = BitString::zeros(wires.len());
        for (i, (w, off, p)) in located.iter().enumerate() {
            let v = p.bit_of(&b.get_bytes(*off, k)).ok_or(Error::UnknownKey { wire: *w })?;
            out.set(i, v);
        }
        terms.push((out, *a));
    }
    SparseState::from_terms(RegisterLayout::single("q", wires.len()), terms)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireCost {
    pub wire: usize,
    pub cnot: u64,
    pub x: u64,
}

/// Gate counts for applying `E~` with CNOTs from the logical qubit into a
/// fresh register plus X gates for the bits of `k0`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub kappa_bits: usize,
    pub num_qubits: usize,
    pub cnot_count: u64,
    pub x_count: u64,
    /// `kappa - 4 N_q`; negative when the margin is gone.
    pub eta: i64,
    pub per_wire: Vec<WireCost>,
}

impl CostReport {
    pub fn within_bound(&self) -> bool {
        self.cnot_count <= (self.kappa_bits * self.num_qubits) as u64
    }
}

fn popcount(bytes: &[u8]) -> u64 {
    bytes.iter().map(|b| b.count_ones() as u64).sum()
}

pub fn cnot_cost(schedule: &KeySchedule, wires: &[usize]) -> Result<CostReport> {
    let mut report = CostReport {
        kappa_bits: schedule.kappa_bits,
        num_qubits: wires.len(),
        eta: schedule.kappa_bits as i64 - 4 * wires.len() as i64,
        ..CostReport::default()
    };
    for &w in wires {
        let p = schedule.pair(w)?;
        let diff: Vec<u8> = p.k0.as_bytes().iter().zip(p.k1.as_bytes()).map(|(a, b)| a ^ b).collect();
        let c = WireCost {
            wire: w,
            cnot: popcount(&diff),
            x: popcount(p.k0.as_bytes()),
        };
        report.cnot_count += c.cnot;
        report.x_count += c.x;
        report.per_wire.push(c);
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub kappa: usize,
    pub num_qubits: usize,
    pub reference_qubits: usize,
    pub distance: f64,
    pub bound: f64,
}

impl Lemma1Report {
    pub fn holds(&self) -> bool {
        self.distance <= self.bound
    }
}

/// Key-averaged `E~ rho E~^dagger` against `I / 2^{kappa N} (x) tr_S(rho)`.
///
/// `rho` has the `num_qubits` encoded qubits in its low bits and
/// `rho.qubits() - num_qubits` reference qubits above them. Keys of distinct
/// wires are independent, so the average over all key vectors factors into
/// per-wire averages `F_ab = E[|k_a><k_b|]`, each enumerated exactly over the
/// `2^kappa (2^kappa - 1)` ordered distinct pairs.
pub fn lemma1_check(kappa: usize, num_qubits: usize, rho: &DensityMatrix) -> Result<Lemma1Report> {
    if kappa == 0 || num_qubits == 0 || num_qubits > rho.qubits() {
        return Err(Error::InvalidParameter("lemma1 needs kappa >= 1 and 1..=qubits(rho) encoded qubits".into()));
    }
    let refs = rho.qubits() - num_qubits;
    let out_q = kappa * num_qubits + refs;
    if out_q > MAX_DENSITY_QUBITS {
        return Err(Error::DimensionOverflow(format!("{out_q} qubits after encoding")));
    }
    let f = pair_averages(kappa);
    let m = 1usize << kappa;
    let big = 1usize << (kappa * num_qubits);
    let sd = 1usize << num_qubits;
    let rd = 1usize << refs;
    let mut sigma = DMatrix::<Complex64>::zeros(big * rd, big * rd);
    let entries = rho.entries();
    for s1 in 0..sd {
        for s2 in 0..sd {
            // Kronecker product of the per-wire blocks, wire 0 lowest.
            let mut block = DMatrix::<f64>::from_element(1, 1, 1.0);
            for i in 0..num_qubits {
                let fi = &f[((s1 >> i) & 1) * 2 + ((s2 >> i) & 1)];
                block = fi.kronecker(&block);
            }
            for r1 in 0..rd {
                for r2 in 0..rd {
                    let c = entries[(r1 * sd + s1, r2 * sd + s2)];
                    if c.norm() == 0.0 {
                        continue;
                    }
                    for x in 0..big {
                        for y in 0..big {
                            let v = block[(x, y)];
                            if v != 0.0 {
                                sigma[(r1 * big + x, r2 * big + y)] += c * v;
                            }
                        }
                    }
                }
            }
        }
    }
    debug_assert_eq!(big, m.pow(num_qubits as u32));
    let sigma = DensityMatrix::from_matrix(out_q, sigma)?;
    let target = rho.replace_low_with_mixed(num_qubits, kappa * num_qubits)?;
    let distance = trace_distance(&sigma, &target)?;
    let bound = 0.5f64.powi(kappa as i32 - 4) * num_qubits as f64;
    Ok(Lemma1Report {
        kappa,
        num_qubits,
        reference_qubits: refs,
        distance,
        bound,
    })
}

/// `[F_00, F_01, F_10, F_11]` with `F_ab = avg over k0 != k1 of |k_a><k_b|`.
fn pair_averages(kappa: usize) -> [DMatrix<f64>; 4] {
    let m = 1usize << kappa;
    let w = 1.0 / (m * (m - 1)) as f64;
    let mut f: [DMatrix<f64>; 4] = std::array::from_fn(|_| DMatrix::zeros(m, m));
    for k0 in 0..m {
        for k1 in 0..m {
            if k0 == k1 {
                continue;
            }
            let k = [k0, k1];
            for a in 0..2 {
                for b in 0..2 {
                    f[a * 2 + b][(k[a], k[b])] += w;
                }
            }
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{allocate_wires, LogicalGate};
    use crate::sim::fidelity;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_state(n: usize, rng: &mut ChaCha20Rng) -> SparseState {
        let terms = (0..1u64 << n).map(|v| {
            (
                BitString::from_u64(v, n),
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            )
        });
        SparseState::normalized(RegisterLayout::single("q", n), terms).unwrap()
    }

    fn schedule(n: usize, kappa: usize, seed: u64) -> KeySchedule {
        let c = allocate_wires(n, &[]).unwrap();
        gen_keys(kappa, &c, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn single_key_example() {
        let mut s = schedule(1, 8, 0);
        s.pairs[0] = WireKeyPair {
            k0: SymKey(vec![0x01]),
            k1: SymKey(vec![0x02]),
        };
        let zero = SparseState::basis(RegisterLayout::single("q", 1), BitString::zeros(1)).unwrap();
        let e = encode(&zero, &s, &[0]).unwrap();
        assert_eq!(e.num_terms(), 1);
        let (b, a) = e.terms().iter().next().unwrap();
        assert_eq!(b.to_u64(), 0x01);
        assert_eq!(*a, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn decode_inverts_encode() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let s = schedule(3, 16, 1);
        for _ in 0..100 {
            let psi = random_state(3, &mut rng);
            let back = decode(&encode(&psi, &s, &[0, 1, 2]).unwrap(), &s, &[0, 1, 2]).unwrap();
            assert!((fidelity(&psi, &back).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn encoding_preserves_inner_products() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let s = schedule(3, 16, 2);
        for _ in 0..10 {
            let a = random_state(3, &mut rng);
            let b = random_state(3, &mut rng);
            let ea = encode(&a, &s, &[0, 1, 2]).unwrap();
            let eb = encode(&b, &s, &[0, 1, 2]).unwrap();
            assert!((a.inner(&b).unwrap() - ea.inner(&eb).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn tampered_segment_is_rejected() {
        let mut s = schedule(1, 8, 5);
        s.pairs[0] = WireKeyPair {
            k0: SymKey(vec![0x01]),
            k1: SymKey(vec![0x02]),
        };
        let layout = encoded_layout(8, &[0]).unwrap();
        let ok = SparseState::basis(layout.clone(), BitString::from_u64(0x02, 8)).unwrap();
        assert_eq!(decode(&ok, &s, &[0]).unwrap().terms().keys().next().unwrap().to_u64(), 1);
        let bad = SparseState::basis(layout, BitString::from_u64(0x03, 8)).unwrap();
        assert_eq!(decode(&bad, &s, &[0]).unwrap_err(), Error::UnknownKey { wire: 0 });
    }

    #[test]
    fn keys_distinct_and_cost_bounded() {
        let c = allocate_wires(3, &[LogicalGate::toffoli(0, 1, 2)]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let s = gen_keys(16, &c, &mut rng).unwrap();
            assert_eq!(s.pairs.len(), 6);
            assert!(s.pairs.iter().all(|p| p.k0 != p.k1));
            let cost = cnot_cost(&s, &s.input_wires).unwrap();
            assert!(cost.within_bound());
            assert!(cost.per_wire.iter().all(|w| w.cnot >= 1));
        }
        assert!(gen_keys(15, &c, &mut rng).is_err());
    }

    #[test]
    fn cost_of_fixed_pair() {
        let mut s = schedule(1, 8, 0);
        s.pairs[0] = WireKeyPair {
            k0: SymKey(vec![0x00]),
            k1: SymKey(vec![0xFF]),
        };
        let r = cnot_cost(&s, &[0]).unwrap();
        assert_eq!((r.cnot_count, r.x_count), (8, 0));
        assert_eq!(r.eta, 4);
    }

    #[test]
    fn pair_average_blocks() {
        let f = pair_averages(3);
        let m = 8.0;
        for i in 0..8 {
            for j in 0..8 {
                let diag = if i == j { 1.0 / m } else { 0.0 };
                let off = if i == j { 0.0 } else { 1.0 / (m * (m - 1.0)) };
                assert!((f[0][(i, j)] - diag).abs() < 1e-15);
                assert!((f[3][(i, j)] - diag).abs() < 1e-15);
                assert!((f[1][(i, j)] - off).abs() < 1e-15);
                assert!((f[2][(i, j)] - off).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lemma1_single_qubit_closed_form() {
        // sigma - target = 2 Re(rho01) (J - I) / (M (M - 1)); J - I has
        // eigenvalues M - 1 and -1 (M - 1 times), so the distance is
        // 2 |Re rho01| / M.
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        for kappa in [5, 6, 7] {
            for _ in 0..5 {
                let psi = random_state(1, &mut rng);
                let rho = DensityMatrix::pure(&psi).unwrap();
                let r = lemma1_check(kappa, 1, &rho).unwrap();
                let want = 2.0 * rho.entries()[(0, 1)].re.abs() / (1u64 << kappa) as f64;
                assert!((r.distance - want).abs() < 1e-12, "{} vs {want}", r.distance);
                assert!(r.holds());
            }
        }
    }

    #[test]
    fn lemma1_basis_and_mixed_inputs() {
        let zero = DensityMatrix::pure(&SparseState::basis(RegisterLayout::single("q", 1), BitString::zeros(1)).unwrap()).unwrap();
        let r = lemma1_check(5, 1, &zero).unwrap();
        assert_eq!(r.bound, 0.5);
        assert!(r.distance < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(1).unwrap();
        assert!(lemma1_check(5, 1, &mixed).unwrap().distance < 1e-12);
    }

    #[test]
    fn lemma1_with_reference_qubit() {
        // Bell pair: encoded half plus one untouched reference qubit.
        let bell = SparseState::normalized(
            RegisterLayout::single("q", 2),
            [(BitString::from_u64(0, 2), Complex64::new(1.0, 0.0)), (BitString::from_u64(3, 2), Complex64::new(1.0, 0.0))],
        )
        .unwrap();
        let rho = DensityMatrix::pure(&bell).unwrap();
        let r5 = lemma1_check(5, 1, &rho).unwrap();
        let r6 = lemma1_check(6, 1, &rho).unwrap();
        assert_eq!(r5.reference_qubits, 1);
        assert!(r5.holds() && r6.holds());
        assert!(r5.distance > 0.0);
    }

    #[test]
    fn lemma1_dimension_cap() {
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(matches!(lemma1_check(8, 2, &rho), Err(Error::DimensionOverflow(_))));
    }
}
