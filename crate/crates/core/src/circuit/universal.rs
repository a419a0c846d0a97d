//! A universal C+P machine: one fixed circuit `U` that runs any C+P circuit
//! `C` (over `N` qubits, at most `L_max` gates, phases `d <= D`) when `C`'s
//! description is supplied as classical input bits.
//!
//! `C` is first rewritten into a normal form over the `N` data qubits plus
//! three auxiliary qubits, using three gate kinds:
//!
//! 1. `R_Z(pi / 2^d)` on a data or auxiliary qubit, `1 <= d <= D`
//! 2. SWAP between a data qubit and an auxiliary qubit
//! 3. Toffoli on the auxiliary qubits (controls aux0, aux1; target aux2)
//!
//! plus an identity used for padding. Codes are assigned in this order:
//! SWAP(data i, aux j) is `3i + j`, the aux Toffoli is `3N`, the phase on
//! qubit `v` with exponent `d` is `3N + 1 + vD + (d - 1)` (data qubits first,
//! then aux), and identity is `3N + 1 + (N + 3)D`. Each slot's code is
//! `ceil(log2(3N + 2 + (N + 3)D))` bits wide.
//!
//! For every slot and every non-identity code, `U` applies the coded gate
//! controlled on "slot bits == code". Controls are matched by flipping the
//! zero positions of the code (visiting codes in Gray order so consecutive
//! codes differ by one flip) and AND-ing the slot bits down an ancilla chain.
//! Controlled SWAP is CNOT / Toffoli / CNOT, the controlled aux Toffoli and
//! the controlled phase go through one extra ancilla.

use super::{CpCircuit, LogicalBuilder, LogicalGate};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::sim::{RegisterLayout, SparseState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalGate {
    Swap { data: usize, aux: usize },
    AuxToffoli,
    Phase { qubit: usize, denom_exp: u32 },
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GateDescription {
    pub code: u64,
    pub width: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniversalMachine {
    circuit: CpCircuit,
    num_data: usize,
    max_gates: usize,
    max_denom_exp: u32,
    slots: usize,
    desc_width: usize,
    aux: [usize; 3],
    ones: [usize; 2],
    desc_base: usize,
    ancillas: Vec<usize>,
}

fn slots_per_gate(max_denom_exp: u32) -> usize {
    // Toffoli: 3 swaps in, aux Toffoli, 3 swaps out. A negative phase
    // R_Z(-pi/2^d) = prod_{j=0..d} R_Z(pi/2^j) with Z = R_Z(pi/2)^2.
    7usize.max(max_denom_exp as usize + 2)
}

impl UniversalMachine {
    pub fn new(num_data: usize, max_gates: usize, max_denom_exp: u32) -> Result<Self> {
        if num_data == 0 {
            return Err(Error::InvalidParameter("universal machine needs at least one data qubit".into()));
        }
        if max_denom_exp == 0 {
            return Err(Error::InvalidParameter("universal machine needs D >= 1".into()));
        }
        let codes = code_count(num_data, max_denom_exp);
        let desc_width = (u64::BITS - (codes - 1).leading_zeros()) as usize;
        let slots = max_gates * slots_per_gate(max_denom_exp);

        let mut b = LogicalBuilder::new(num_data);
        let aux: [usize; 3] = b.alloc(3).try_into().unwrap();
        let ones: [usize; 2] = b.alloc(2).try_into().unwrap();
        b.set_constants(ones[0], ones[1]);
        let desc_base = b.num_qubits();
        b.alloc(slots * desc_width);
        let ancillas = b.alloc(desc_width);

        let mut m = Self {
            circuit: CpCircuit::empty(0),
            num_data,
            max_gates,
            max_denom_exp,
            slots,
            desc_width,
            aux,
            ones,
            desc_base,
            ancillas,
        };
        for s in 0..slots {
            m.emit_slot(&mut b, s);
        }
        m.circuit = b.build()?;
        Ok(m)
    }

    fn emit_slot(&self, b: &mut LogicalBuilder, slot: usize) {
        let w = self.desc_width;
        let bits: Vec<usize> = (0..w).map(|k| self.desc_base + slot * w + k).collect();
        let ladder = &self.ancillas[..w - 1];
        let extra = self.ancillas[w - 1];
        let all = (1u64 << w) - 1;
        let mut flipped = 0u64;
        for k in 0..(1u64 << w) {
            let code = k ^ (k >> 1);
            let gate = self.decode(code);
            if matches!(gate, NormalGate::Identity) {
                continue;
            }
            let want = !code & all;
            for (i, &q) in bits.iter().enumerate() {
                if (flipped ^ want) >> i & 1 == 1 {
                    b.x(q);
                }
            }
            flipped = want;
            let flag = b.and_ladder(&bits, ladder);
            match gate {
                NormalGate::Swap { data, aux } => {
                    let a = self.aux[aux];
                    b.cnot(a, data);
                    b.toffoli(flag, data, a);
                    b.cnot(a, data);
                }
                NormalGate::AuxToffoli => {
                    b.toffoli(flag, self.aux[0], extra);
                    b.toffoli(extra, self.aux[1], self.aux[2]);
                    b.toffoli(flag, self.aux[0], extra);
                }
                NormalGate::Phase { qubit, denom_exp } => {
                    b.toffoli(flag, qubit, extra);
                    b.phase(extra, denom_exp, false);
                    b.toffoli(flag, qubit, extra);
                }
                NormalGate::Identity => unreachable!(),
            }
            b.undo_and_ladder(&bits, ladder);
        }
        for (i, &q) in bits.iter().enumerate() {
            if flipped >> i & 1 == 1 {
                b.x(q);
            }
        }
    }

    pub fn circuit(&self) -> &CpCircuit {
        &self.circuit
    }

    pub fn num_data(&self) -> usize {
        self.num_data
    }

    pub fn max_gates(&self) -> usize {
        self.max_gates
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn desc_width(&self) -> usize {
        self.desc_width
    }

    pub fn ancilla_count(&self) -> usize {
        self.ancillas.len()
    }

    /// Number of distinct gate codes, including identity.
    pub fn code_count(&self) -> u64 {
        code_count(self.num_data, self.max_denom_exp)
    }

    pub fn identity_code(&self) -> u64 {
        self.code_count() - 1
    }

    pub fn encode(&self, g: NormalGate) -> u64 {
        let n = self.num_data as u64;
        let d = self.max_denom_exp as u64;
        match g {
            NormalGate::Swap { data, aux } => 3 * data as u64 + aux as u64,
            NormalGate::AuxToffoli => 3 * n,
            NormalGate::Phase { qubit, denom_exp } => 3 * n + 1 + qubit as u64 * d + (denom_exp as u64 - 1),
            NormalGate::Identity => self.identity_code(),
        }
    }

    /// Codes past the identity code are unused and act as identity.
    pub fn decode(&self, code: u64) -> NormalGate {
        let n = self.num_data as u64;
        let d = self.max_denom_exp as u64;
        if code < 3 * n {
            NormalGate::Swap {
                data: (code / 3) as usize,
                aux: (code % 3) as usize,
            }
        } else if code == 3 * n {
            NormalGate::AuxToffoli
        } else if code < self.identity_code() {
            let r = code - 3 * n - 1;
            let v = (r / d) as usize;
            let qubit = if v < self.num_data { v } else { self.aux[v - self.num_data] };
            NormalGate::Phase {
                qubit,
                denom_exp: (r % d) as u32 + 1,
            }
        } else {
            NormalGate::Identity
        }
    }

    /// Rewrite `c` into normal-form gates (without padding).
    pub fn normal_form(&self, c: &CpCircuit) -> Result<Vec<NormalGate>> {
        if c.num_inputs() != self.num_data {
            return Err(Error::InvalidCircuit(format!(
                "circuit has {} qubits, machine has {}",
                c.num_inputs(),
                self.num_data
            )));
        }
        if c.len() > self.max_gates {
            return Err(Error::CircuitTooLarge {
                gates: c.len(),
                max: self.max_gates,
            });
        }
        let mut out = Vec::new();
        for g in c.logical_gates()? {
            match g {
                LogicalGate::Toffoli { controls, target } => {
                    let qs = [controls[0], controls[1], target];
                    for (j, q) in qs.iter().enumerate() {
                        out.push(NormalGate::Swap { data: *q, aux: j });
                    }
                    out.push(NormalGate::AuxToffoli);
                    for (j, q) in qs.iter().enumerate() {
                        out.push(NormalGate::Swap { data: *q, aux: j });
                    }
                }
                LogicalGate::Phase {
                    qubit,
                    denom_exp,
                    negative,
                } => {
                    if denom_exp > self.max_denom_exp {
                        return Err(Error::InvalidCircuit(format!(
                            "phase exponent {denom_exp} exceeds machine bound {}",
                            self.max_denom_exp
                        )));
                    }
                    let exps: Vec<u32> = if negative { (0..=denom_exp).collect() } else { vec![denom_exp] };
                    for e in exps {
                        if e == 0 {
                            out.push(NormalGate::Phase { qubit, denom_exp: 1 });
                            out.push(NormalGate::Phase { qubit, denom_exp: 1 });
                        } else {
                            out.push(NormalGate::Phase { qubit, denom_exp: e });
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn describe(&self, c: &CpCircuit) -> Result<Vec<GateDescription>> {
        let normal = self.normal_form(c)?;
        if normal.len() > self.slots {
            return Err(Error::CircuitTooLarge {
                gates: c.len(),
                max: self.max_gates,
            });
        }
        let width = self.desc_width as u32;
        let mut desc: Vec<GateDescription> = normal
            .into_iter()
            .map(|g| GateDescription {
                code: self.encode(g),
                width,
            })
            .collect();
        desc.resize(
            self.slots,
            GateDescription {
                code: self.identity_code(),
                width,
            },
        );
        Ok(desc)
    }

    /// Values of all non-data input qubits: aux and ancillas 0, constants 1,
    /// description bits as given. Data bits are left 0.
    pub fn classical_input(&self, desc: &[GateDescription]) -> Result<BitString> {
        if desc.len() != self.slots || desc.iter().any(|d| d.width as usize != self.desc_width) {
            return Err(Error::InvalidParameter("description does not fit the machine".into()));
        }
        let mut bits = BitString::zeros(self.circuit.num_inputs());
        bits.set(self.ones[0], true);
        bits.set(self.ones[1], true);
        for (s, d) in desc.iter().enumerate() {
            bits.set_u64(self.desc_base + s * self.desc_width, self.desc_width, d.code);
        }
        Ok(bits)
    }

    /// Indices of input qubits that carry quantum data.
    pub fn data_qubits(&self) -> Vec<usize> {
        (0..self.num_data).collect()
    }

    /// Place a data state (bit `q` = data qubit `q`) next to the classical
    /// input, giving a state over all of `U`'s qubits in one register `q`.
    pub fn embed(&self, data: &SparseState, desc: &[GateDescription]) -> Result<SparseState> {
        if data.layout().total_bits() != self.num_data {
            return Err(Error::LayoutMismatch("data state width".into()));
        }
        let classical = self.classical_input(desc)?;
        let n = self.circuit.num_inputs();
        let terms = data.terms().iter().map(|(b, a)| {
            let mut full = classical.clone();
            full.set_u64(0, self.num_data, b.get_u64(0, self.num_data));
            (full, *a)
        });
        SparseState::from_terms(RegisterLayout::single("q", n), terms)
    }

    /// Project `U`'s output back to the data qubits, checking that every
    /// other qubit returned to its classical input value.
    pub fn extract(&self, out: &SparseState, desc: &[GateDescription]) -> Result<SparseState> {
        let classical = self.classical_input(desc)?;
        let n = self.circuit.num_inputs();
        if out.layout().total_bits() != n {
            return Err(Error::LayoutMismatch("machine output width".into()));
        }
        let mut terms = Vec::with_capacity(out.num_terms());
        for (b, a) in out.terms() {
            let mut rest = b.clone();
            rest.set_u64(0, self.num_data, 0);
            if rest != classical {
                return Err(Error::InvalidCircuit("universal machine left a non-data qubit dirty".into()));
            }
            terms.push((b.extract(0, self.num_data), *a));
        }
        SparseState::from_terms(RegisterLayout::single("q", self.num_data), terms)
    }
}

fn code_count(num_data: usize, max_denom_exp: u32) -> u64 {
    let n = num_data as u64;
    3 * n + 2 + (n + 3) * max_denom_exp as u64
}

/// Build the universal machine for `(num_data, max_gates, max_denom_exp)`
/// and describe `c` for it.
pub fn universalize(
    c: &CpCircuit,
    num_data: usize,
    max_denom_exp: u32,
    max_gates: usize,
) -> Result<(UniversalMachine, Vec<GateDescription>)> {
    let m = UniversalMachine::new(num_data, max_gates, max_denom_exp)?;
    let desc = m.describe(c)?;
    Ok((m, desc))
}

/// Bound on description width: `ceil(log2(3N' + 1 + N'D))` with `N' = N + 3`.
pub fn description_width_bound(num_data: usize, max_denom_exp: u32) -> usize {
    let np = num_data as u64 + 3;
    let count = 3 * np + 1 + np * max_denom_exp as u64;
    (u64::BITS - (count - 1).leading_zeros()) as usize
}
