use nalgebra::DMatrix;
use num_complex::Complex64;

use super::SparseState;
use crate::error::{Error, Result};

pub const MAX_DENSITY_QUBITS: usize = 14;

/// Small dense density matrix (at most `2^14` dimensional).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    qubits: usize,
    entries: DMatrix<Complex64>,
}

fn check_qubits(q: usize) -> Result<()> {
    if q > MAX_DENSITY_QUBITS {
        return Err(Error::DimensionOverflow(format!(
            "{q} qubits exceeds the {MAX_DENSITY_QUBITS}-qubit density-matrix cap"
        )));
    }
    Ok(())
}

impl DensityMatrix {
    pub fn zeros(qubits: usize) -> Result<Self> {
        check_qubits(qubits)?;
        let d = 1usize << qubits;
        Ok(Self {
            qubits,
            entries: DMatrix::zeros(d, d),
        })
    }

    pub fn maximally_mixed(qubits: usize) -> Result<Self> {
        let mut m = Self::zeros(qubits)?;
        let d = m.dim();
        for i in 0..d {
            m.entries[(i, i)] = Complex64::new(1.0 / d as f64, 0.0);
        }
        Ok(m)
    }

    pub fn from_matrix(qubits: usize, entries: DMatrix<Complex64>) -> Result<Self> {
        check_qubits(qubits)?;
        let d = 1usize << qubits;
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::LayoutMismatch("density matrix shape".into()));
        }
        Ok(Self { qubits, entries })
    }

    pub fn pure(state: &SparseState) -> Result<Self> {
        density_average(&[(1.0, state.clone())])
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut DMatrix<Complex64> {
        &mut self.entries
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| (self.entries[(i, j)] - self.entries[(j, i)].conj()).norm() <= tol))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.entries)
    }

    /// `I / 2^a (x) tr_low(rho)`: trace out the low `traced` qubits of
    /// `self` and put the maximally mixed state on `replacement` fresh low
    /// qubits.
    pub fn replace_low_with_mixed(&self, traced: usize, replacement: usize) -> Result<Self> {
        if traced > self.qubits {
            return Err(Error::InvalidParameter("tracing out more qubits than present".into()));
        }
        let rest = self.qubits - traced;
        let out_q = rest + replacement;
        check_qubits(out_q)?;
        let lo = 1usize << traced;
        let hd = 1usize << rest;
        let mut reduced = DMatrix::<Complex64>::zeros(hd, hd);
        for r1 in 0..hd {
            for r2 in 0..hd {
                let mut acc = Complex64::default();
                for s in 0..lo {
                    acc += self.entries[(r1 * lo + s, r2 * lo + s)];
                }
                reduced[(r1, r2)] = acc;
            }
        }
        let ld = 1usize << replacement;
        let mut out = DMatrix::<Complex64>::zeros(hd * ld, hd * ld);
        let w = 1.0 / ld as f64;
        for r1 in 0..hd {
            for r2 in 0..hd {
                let v = reduced[(r1, r2)] * w;
                if v == Complex64::default() {
                    continue;
                }
                for s in 0..ld {
                    out[(r1 * ld + s, r2 * ld + s)] = v;
                }
            }
        }
        Self::from_matrix(out_q, out)
    }
}

fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    // Symmetrize to kill rounding asymmetry before the Hermitian solver.
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().copied().collect()
}

/// `sum_i w_i |psi_i><psi_i|` for states of at most 14 qubits.
pub fn density_average(states: &[(f64, SparseState)]) -> Result<DensityMatrix> {
    let q = states
        .first()
        .map(|(_, s)| s.layout().total_bits())
        .ok_or_else(|| Error::InvalidParameter("no states".into()))?;
    let mut rho = DensityMatrix::zeros(q)?;
    for (w, s) in states {
        if s.layout().total_bits() != q {
            return Err(Error::LayoutMismatch("mixed widths in density average".into()));
        }
        let terms: Vec<(usize, Complex64)> = s.terms().iter().map(|(b, a)| (b.to_u64() as usize, *a)).collect();
        for (i, a) in &terms {
            for (j, b) in &terms {
                rho.entries[(*i, *j)] += a * b.conj() * *w;
            }
        }
    }
    Ok(rho)
}

/// `1/2 ||rho - sigma||_tr`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.qubits != sigma.qubits {
        return Err(Error::LayoutMismatch("trace distance of different dimensions".into()));
    }
    let diff = &rho.entries - &sigma.entries;
    Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|e| e.abs()).sum::<f64>())
}
