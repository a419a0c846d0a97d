//! Sparse state vectors over named bit registers.
//!
//! A basis label is the concatenation of all registers in declaration order;
//! register `r` occupies bits `offset(r)..offset(r)+width(r)` with bit 0 the
//! least significant bit of the register's value. Terms are kept in a
//! `BTreeMap` so iteration, serialization and sampling are deterministic.

mod density;

pub use density::{density_average, trace_distance, DensityMatrix, MAX_DENSITY_QUBITS};

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use crate::bits::BitString;
use crate::error::{Error, Result};

pub const PRUNE_EPSILON: f64 = 1e-12;
pub const NORM_TOLERANCE: f64 = 1e-9;
pub const MAX_QFT_BITS: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RegisterLayout {
    registers: Vec<(String, usize)>,
    total_bits: usize,
}

impl RegisterLayout {
    pub fn new<S: Into<String>>(regs: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut layout = Self::default();
        for (name, width) in regs {
            layout.push(name.into(), width)?;
        }
        Ok(layout)
    }

    pub fn single(name: &str, width: usize) -> Self {
        Self::new([(name, width)]).expect("single register")
    }

    pub fn registers(&self) -> &[(String, usize)] {
        &self.registers
    }

    pub fn total_bits(&self) -> usize {
        self.total_bits
    }

    pub fn push(&mut self, name: String, width: usize) -> Result<()> {
        if self.registers.iter().any(|(n, _)| *n == name) {
            return Err(Error::LayoutMismatch(format!("duplicate register {name:?}")));
        }
        self.registers.push((name, width));
        self.total_bits += width;
        Ok(())
    }

    /// `(offset, width)` of a register.
    pub fn locate(&self, name: &str) -> Result<(usize, usize)> {
        let mut off = 0;
        for (n, w) in &self.registers {
            if n == name {
                return Ok((off, *w));
            }
            off += w;
        }
        Err(Error::UnknownRegister(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.registers.iter().any(|(n, _)| n == name)
    }

    /// The layout with the named registers dropped.
    pub fn without_all(&self, names: &[&str]) -> Result<Self> {
        for n in names {
            self.locate(n)?;
        }
        let registers: Vec<_> = self.registers.iter().filter(|(n, _)| !names.contains(&n.as_str())).cloned().collect();
        let total_bits = registers.iter().map(|(_, w)| w).sum();
        Ok(Self {
            registers,
            total_bits,
        })
    }

    fn without(&self, name: &str) -> Self {
        let registers: Vec<_> = self.registers.iter().filter(|(n, _)| n != name).cloned().collect();
        let total_bits = registers.iter().map(|(_, w)| w).sum();
        Self {
            registers,
            total_bits,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseState {
    layout: RegisterLayout,
    terms: BTreeMap<BitString, Complex64>,
}

fn phase_factor(j: i64, n: u64) -> Complex64 {
    let m = 2 * n as i64;
    let r = j.rem_euclid(m);
    Complex64::from_polar(1.0, PI * r as f64 / n as f64)
}

impl SparseState {
    /// The basis state `bits`.
    pub fn basis(layout: RegisterLayout, bits: BitString) -> Result<Self> {
        if bits.len() != layout.total_bits() {
            return Err(Error::LayoutMismatch(format!(
                "basis string has {} bits, layout has {}",
                bits.len(),
                layout.total_bits()
            )));
        }
        let mut terms = BTreeMap::new();
        terms.insert(bits, Complex64::new(1.0, 0.0));
        Ok(Self { layout, terms })
    }

    pub fn zero(layout: RegisterLayout) -> Self {
        let n = layout.total_bits();
        Self::basis(layout, BitString::zeros(n)).expect("zero state")
    }

    /// Build from explicit terms, which must already be normalized. Repeated
    /// labels are summed.
    pub fn from_terms(layout: RegisterLayout, terms: impl IntoIterator<Item = (BitString, Complex64)>) -> Result<Self> {
        let mut map: BTreeMap<BitString, Complex64> = BTreeMap::new();
        for (b, a) in terms {
            if b.len() != layout.total_bits() {
                return Err(Error::LayoutMismatch("term width differs from layout".into()));
            }
            *map.entry(b).or_default() += a;
        }
        let mut s = Self { layout, terms: map };
        s.prune();
        s.check_norm()?;
        Ok(s)
    }

    /// Terms taken as given, without pruning or a norm check.
    pub(crate) fn from_raw(layout: RegisterLayout, terms: BTreeMap<BitString, Complex64>) -> Result<Self> {
        if terms.keys().any(|b| b.len() != layout.total_bits()) {
            return Err(Error::LayoutMismatch("term width differs from layout".into()));
        }
        Ok(Self { layout, terms })
    }

    /// A dense random state on one register: every amplitude has real and
    /// imaginary parts uniform in `[-1, 1]` before normalization.
    pub fn random<R: Rng + ?Sized>(name: &str, n: usize, rng: &mut R) -> Result<Self> {
        if n > 20 {
            return Err(Error::DimensionOverflow(format!("{n} qubits for a dense random state")));
        }
        let terms: Vec<_> = (0..1u64 << n)
            .map(|v| {
                let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                (BitString::from_u64(v, n), a)
            })
            .collect();
        Self::normalized(RegisterLayout::single(name, n), terms)
    }

    /// Like `from_terms` but rescales to unit norm.
    pub fn normalized(layout: RegisterLayout, terms: impl IntoIterator<Item = (BitString, Complex64)>) -> Result<Self> {
        let mut map: BTreeMap<BitString, Complex64> = BTreeMap::new();
        for (b, a) in terms {
            if b.len() != layout.total_bits() {
                return Err(Error::LayoutMismatch("term width differs from layout".into()));
            }
            *map.entry(b).or_default() += a;
        }
        let norm: f64 = map.values().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidParameter("zero vector".into()));
        }
        for a in map.values_mut() {
            *a /= norm;
        }
        let mut s = Self { layout, terms: map };
        s.prune();
        Ok(s)
    }

    /// Dense amplitudes (index = basis value) into a sparse state.
    pub fn from_dense(layout: RegisterLayout, amps: &[Complex64]) -> Result<Self> {
        let n = layout.total_bits();
        if amps.len() != 1usize << n {
            return Err(Error::LayoutMismatch("dense vector length".into()));
        }
        Self::normalized(
            layout,
            amps.iter()
                .enumerate()
                .filter(|(_, a)| a.norm() >= PRUNE_EPSILON)
                .map(|(i, a)| (BitString::from_u64(i as u64, n), *a)),
        )
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn terms(&self) -> &BTreeMap<BitString, Complex64> {
        &self.terms
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn amplitude(&self, bits: &BitString) -> Complex64 {
        self.terms.get(bits).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    fn prune(&mut self) {
        self.terms.retain(|_, a| a.norm() >= PRUNE_EPSILON);
    }

    fn check_norm(&self) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidParameter(format!("state norm^2 {n} is not 1")));
        }
        Ok(())
    }

    /// Carry each term to `f(label)`. `f` must be injective on the support.
    pub fn apply_classical(&mut self, mut f: impl FnMut(&BitString) -> Result<BitString>) -> Result<()> {
        let mut out = BTreeMap::new();
        for (b, a) in &self.terms {
            let img = f(b)?;
            if img.len() != self.layout.total_bits() {
                return Err(Error::LayoutMismatch("classical map changed width".into()));
            }
            if out.insert(img, *a).is_some() {
                return Err(Error::NotInjective);
            }
        }
        self.terms = out;
        Ok(())
    }

    /// Multiply each term by `omega_n^{phi(label)}` with `omega_n = e^{i pi / n}`.
    pub fn apply_phase(&mut self, n: u64, mut phi: impl FnMut(&BitString) -> i64) {
        assert!(n > 0);
        let mut cache: HashMap<i64, Complex64> = HashMap::new();
        let m = 2 * n as i64;
        for (b, a) in self.terms.iter_mut() {
            let j = phi(b).rem_euclid(m);
            let w = *cache.entry(j).or_insert_with(|| phase_factor(j, n));
            *a *= w;
        }
    }

    /// `X^x Z^z`: Z first (sign from the original label), then X.
    pub fn pauli_frame(&mut self, x_mask: &BitString, z_mask: &BitString) -> Result<()> {
        let n = self.layout.total_bits();
        if x_mask.len() != n || z_mask.len() != n {
            return Err(Error::LayoutMismatch("Pauli mask width".into()));
        }
        let mut out = BTreeMap::new();
        for (b, a) in &self.terms {
            let sign = if b.and_popcount(z_mask) % 2 == 1 { -1.0 } else { 1.0 };
            out.insert(b.xor(x_mask), a * sign);
        }
        self.terms = out;
        Ok(())
    }

    pub fn inner(&self, other: &SparseState) -> Result<Complex64> {
        if self.layout.total_bits() != other.layout.total_bits() {
            return Err(Error::LayoutMismatch("inner product of different widths".into()));
        }
        let (small, large, conj_small) = if self.terms.len() <= other.terms.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut acc = Complex64::default();
        for (b, a) in &small.terms {
            if let Some(c) = large.terms.get(b) {
                acc += if conj_small { a.conj() * c } else { c.conj() * a };
            }
        }
        Ok(acc)
    }

    pub fn append_register(&mut self, name: &str, width: usize) -> Result<()> {
        self.layout.push(name.to_string(), width)?;
        let total = self.layout.total_bits();
        let terms = std::mem::take(&mut self.terms);
        self.terms = terms.into_iter().map(|(b, a)| (b.resized(total), a)).collect();
        Ok(())
    }

    /// Drop a register that is zero in every term.
    pub fn remove_register(&mut self, name: &str) -> Result<()> {
        let (off, width) = self.layout.locate(name)?;
        if !self.terms.keys().all(|b| b.is_zero_range(off, width)) {
            return Err(Error::RegisterNotZero(name.to_string()));
        }
        self.layout = self.layout.without(name);
        let terms = std::mem::take(&mut self.terms);
        self.terms = terms
            .into_iter()
            .map(|(b, a)| (b.remove_range(off, width), a))
            .collect();
        Ok(())
    }

    /// Carry each term to `f(label)` under a new layout. `f` must be
    /// injective on the support and produce labels of the new width.
    pub fn remap(&mut self, layout: RegisterLayout, mut f: impl FnMut(&BitString) -> Result<BitString>) -> Result<()> {
        let mut out = BTreeMap::new();
        for (b, a) in &self.terms {
            let img = f(b)?;
            if img.len() != layout.total_bits() {
                return Err(Error::LayoutMismatch("remapped label width".into()));
            }
            if out.insert(img, *a).is_some() {
                return Err(Error::NotInjective);
            }
        }
        self.layout = layout;
        self.terms = out;
        Ok(())
    }

    /// Reinterpret the same bits under another layout of equal width.
    pub fn relabel(&mut self, layout: RegisterLayout) -> Result<()> {
        if layout.total_bits() != self.layout.total_bits() {
            return Err(Error::LayoutMismatch("relabel width".into()));
        }
        self.layout = layout;
        Ok(())
    }

    /// Tensor product; `self` occupies the low bits.
    pub fn tensor(&self, hi: &SparseState) -> Result<SparseState> {
        let mut layout = self.layout.clone();
        for (n, w) in hi.layout.registers() {
            layout.push(n.clone(), *w)?;
        }
        let mut terms = BTreeMap::new();
        for (b, a) in &self.terms {
            for (c, d) in &hi.terms {
                terms.insert(b.concat(c), a * d);
            }
        }
        let mut s = SparseState { layout, terms };
        s.prune();
        Ok(s)
    }

    pub fn register_value(&self, bits: &BitString, name: &str) -> Result<BitString> {
        let (off, w) = self.layout.locate(name)?;
        Ok(bits.extract(off, w))
    }

    /// Sample a full basis label with Born probabilities.
    pub fn measure_all<R: Rng + ?Sized>(&self, rng: &mut R) -> (BitString, f64) {
        let total = self.norm_sqr();
        let r: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut last = None;
        for (b, a) in &self.terms {
            let p = a.norm_sqr();
            acc += p;
            last = Some((b, p));
            if r < acc {
                return (b.clone(), p / total);
            }
        }
        let (b, p) = last.expect("measuring an empty state");
        (b.clone(), p / total)
    }

    /// Born distribution of one register's value.
    pub fn register_distribution(&self, name: &str) -> Result<BTreeMap<BitString, f64>> {
        let (off, w) = self.layout.locate(name)?;
        let mut dist = BTreeMap::new();
        for (b, a) in &self.terms {
            *dist.entry(b.extract(off, w)).or_insert(0.0) += a.norm_sqr();
        }
        Ok(dist)
    }

    /// Measure one register, collapse and renormalize. Returns the outcome
    /// and its probability.
    pub fn measure_register<R: Rng + ?Sized>(&mut self, name: &str, rng: &mut R) -> Result<(BitString, f64)> {
        let (off, w) = self.layout.locate(name)?;
        let dist = self.register_distribution(name)?;
        let r: f64 = rng.gen::<f64>() * dist.values().sum::<f64>();
        let mut acc = 0.0;
        let mut pick = None;
        for (v, p) in &dist {
            acc += p;
            pick = Some((v.clone(), *p));
            if r < acc {
                break;
            }
        }
        let (v, p) = pick.ok_or_else(|| Error::InvalidParameter("empty state".into()))?;
        self.terms.retain(|b, _| b.extract(off, w) == v);
        let s = p.sqrt();
        for a in self.terms.values_mut() {
            *a /= s;
        }
        Ok((v, p))
    }

    fn fourier(&mut self, name: &str, inverse: bool) -> Result<()> {
        let (off, w) = self.layout.locate(name)?;
        if w > MAX_QFT_BITS {
            return Err(Error::DimensionOverflow(format!("QFT on {w} bits (max {MAX_QFT_BITS})")));
        }
        let dim = 1usize << w;
        let mut planner = FftPlanner::<f64>::new();
        // rustfft's inverse transform uses e^{+2 pi i jk/N}, the QFT sign.
        let fft = if inverse {
            planner.plan_fft_forward(dim)
        } else {
            planner.plan_fft_inverse(dim)
        };
        let scale = 1.0 / (dim as f64).sqrt();
        let mut groups: BTreeMap<BitString, Vec<Complex64>> = BTreeMap::new();
        for (b, a) in &self.terms {
            let mut rest = b.clone();
            let x = rest.get_u64(off, w) as usize;
            rest.set_u64(off, w, 0);
            groups.entry(rest).or_insert_with(|| vec![Complex64::default(); dim])[x] = *a;
        }
        let mut out = BTreeMap::new();
        for (rest, mut buf) in groups {
            fft.process(&mut buf);
            for (y, a) in buf.into_iter().enumerate() {
                let a = a * scale;
                if a.norm() >= PRUNE_EPSILON {
                    let mut b = rest.clone();
                    b.set_u64(off, w, y as u64);
                    out.insert(b, a);
                }
            }
        }
        self.terms = out;
        Ok(())
    }

    /// `|x> -> 2^{-n/2} sum_y e^{2 pi i x y / 2^n} |y>` on one register.
    pub fn qft(&mut self, name: &str) -> Result<()> {
        self.fourier(name, false)
    }

    pub fn inverse_qft(&mut self, name: &str) -> Result<()> {
        self.fourier(name, true)
    }

    /// Dense amplitude vector indexed by basis value.
    pub fn to_dense(&self) -> Result<Vec<Complex64>> {
        let n = self.layout.total_bits();
        if n > 24 {
            return Err(Error::DimensionOverflow(format!("{n} qubits")));
        }
        let mut v = vec![Complex64::default(); 1 << n];
        for (b, a) in &self.terms {
            v[b.to_u64() as usize] = *a;
        }
        Ok(v)
    }
}

/// `|<s1|s2>|^2`; insensitive to global phase.
pub fn fidelity(s1: &SparseState, s2: &SparseState) -> Result<f64> {
    if s1.layout.total_bits() != s2.layout.total_bits() {
        return Err(Error::LayoutMismatch(format!(
            "{} vs {} bits",
            s1.layout.total_bits(),
            s2.layout.total_bits()
        )));
    }
    Ok(s1.inner(s2)?.norm_sqr())
}

/// Number of gates in the textbook QFT circuit on `n` qubits: `n` Hadamards
/// and `n(n-1)/2` controlled phase rotations (final swaps are relabelling).
pub fn qft_gate_count(n: usize) -> usize {
    n + n * n.saturating_sub(1) / 2
}
