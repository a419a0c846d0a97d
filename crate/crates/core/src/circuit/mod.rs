//! C+P circuits: Toffoli gates and single-qubit `R_Z(pi / 2^d)` phases.
//!
//! Circuits are written over logical qubits and then wire-allocated: a
//! Toffoli consumes the current wires of its three qubits and produces three
//! fresh ones, while a phase gate leaves its wire in place. With `N` inputs
//! and `L` gates there are at most `N + 3L` wires.
//!
//! Text format (UTF-8, one item per line, `#` starts a comment):
//!
//! ```text
//! inputs 3
//! toff 0 1 2        # controls 0 and 1, target 2
//! phase 2 3 neg     # R_Z(-pi/8) on qubit 2
//! ```

mod builder;
mod phase;
mod universal;

pub use builder::LogicalBuilder;
pub use phase::{decompose_phase, Angle};
pub use universal::{description_width_bound, universalize, GateDescription, NormalGate, UniversalMachine};

use std::fmt::Write as _;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::sim::SparseState;

/// Largest phase denominator exponent accepted by default.
pub const DEFAULT_MAX_DENOM_EXP: u32 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LogicalGate {
    /// Flip `target` when both controls are 1.
    Toffoli { controls: [usize; 2], target: usize },
    /// `diag(1, e^{+-i pi / 2^d})`.
    Phase {
        qubit: usize,
        denom_exp: u32,
        negative: bool,
    },
}

impl LogicalGate {
    pub fn toffoli(c1: usize, c2: usize, t: usize) -> Self {
        LogicalGate::Toffoli {
            controls: [c1, c2],
            target: t,
        }
    }

    pub fn phase(qubit: usize, denom_exp: u32) -> Self {
        LogicalGate::Phase {
            qubit,
            denom_exp,
            negative: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    /// `inputs = [control, control, target]`; `outputs` in the same order.
    Toffoli { inputs: [usize; 3], outputs: [usize; 3] },
    Phase {
        wire: usize,
        denom_exp: u32,
        negative: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CpCircuit {
    num_inputs: usize,
    gates: Vec<Gate>,
    num_wires: usize,
    output_wires: Vec<usize>,
}

/// Wire-allocate a logical gate list over `num_inputs` qubits.
pub fn allocate_wires(num_inputs: usize, logical: &[LogicalGate]) -> Result<CpCircuit> {
    allocate_wires_bounded(num_inputs, logical, DEFAULT_MAX_DENOM_EXP)
}

pub fn allocate_wires_bounded(num_inputs: usize, logical: &[LogicalGate], max_denom_exp: u32) -> Result<CpCircuit> {
    let mut current: Vec<usize> = (0..num_inputs).collect();
    let mut next = num_inputs;
    let mut gates = Vec::with_capacity(logical.len());
    for (i, g) in logical.iter().enumerate() {
        match *g {
            LogicalGate::Toffoli { controls, target } => {
                let qs = [controls[0], controls[1], target];
                if let Some(q) = qs.iter().find(|&&q| q >= num_inputs) {
                    return Err(Error::InvalidCircuit(format!("gate {i}: qubit {q} out of range")));
                }
                if qs[0] == qs[1] || qs[0] == qs[2] || qs[1] == qs[2] {
                    return Err(Error::InvalidCircuit(format!("gate {i}: Toffoli repeats a qubit")));
                }
                let inputs = qs.map(|q| current[q]);
                let outputs = [next, next + 1, next + 2];
                next += 3;
                for (q, w) in qs.iter().zip(outputs) {
                    current[*q] = w;
                }
                gates.push(Gate::Toffoli { inputs, outputs });
            }
            LogicalGate::Phase {
                qubit,
                denom_exp,
                negative,
            } => {
                if qubit >= num_inputs {
                    return Err(Error::InvalidCircuit(format!("gate {i}: qubit {qubit} out of range")));
                }
                if denom_exp > max_denom_exp {
                    return Err(Error::InvalidCircuit(format!(
                        "gate {i}: phase exponent {denom_exp} exceeds bound {max_denom_exp}"
                    )));
                }
                gates.push(Gate::Phase {
                    wire: current[qubit],
                    denom_exp,
                    negative,
                });
            }
        }
    }
    Ok(CpCircuit {
        num_inputs,
        gates,
        num_wires: next,
        output_wires: current,
    })
}

impl CpCircuit {
    /// Rebuild from wire-level data, checking every allocation invariant.
    pub fn from_parts(num_inputs: usize, gates: Vec<Gate>, num_wires: usize, output_wires: Vec<usize>) -> Result<Self> {
        let c = Self {
            num_inputs,
            gates,
            num_wires,
            output_wires,
        };
        let logical = c.logical_gates()?;
        let rebuilt = allocate_wires(num_inputs, &logical)?;
        if rebuilt != c {
            return Err(Error::InvalidCircuit("wire allocation is not canonical".into()));
        }
        Ok(c)
    }

    pub fn empty(num_inputs: usize) -> Self {
        allocate_wires(num_inputs, &[]).expect("empty circuit")
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn num_wires(&self) -> usize {
        self.num_wires
    }

    pub fn input_wires(&self) -> Vec<usize> {
        (0..self.num_inputs).collect()
    }

    pub fn output_wires(&self) -> &[usize] {
        &self.output_wires
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn toffoli_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Toffoli { .. })).count()
    }

    pub fn max_denom_exp(&self) -> u32 {
        self.gates
            .iter()
            .filter_map(|g| match g {
                Gate::Phase { denom_exp, .. } => Some(*denom_exp),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Recover the logical gate list by tracking which qubit owns each wire.
    pub fn logical_gates(&self) -> Result<Vec<LogicalGate>> {
        let mut owner: Vec<Option<usize>> = vec![None; self.num_wires.max(self.num_inputs)];
        for (q, o) in owner.iter_mut().enumerate().take(self.num_inputs) {
            *o = Some(q);
        }
        let mut out = Vec::with_capacity(self.gates.len());
        for (i, g) in self.gates.iter().enumerate() {
            let lookup = |w: usize| -> Result<usize> {
                owner
                    .get(w)
                    .copied()
                    .flatten()
                    .ok_or_else(|| Error::InvalidCircuit(format!("gate {i}: wire {w} is not live")))
            };
            match *g {
                Gate::Toffoli { inputs, outputs } => {
                    let qs = [lookup(inputs[0])?, lookup(inputs[1])?, lookup(inputs[2])?];
                    for (w, o) in inputs.iter().zip(outputs) {
                        owner[*w] = None;
                        if o >= owner.len() {
                            return Err(Error::InvalidCircuit(format!("gate {i}: wire {o} out of range")));
                        }
                        if owner[o].is_some() {
                            return Err(Error::InvalidCircuit(format!("gate {i}: wire {o} produced twice")));
                        }
                    }
                    for (q, o) in qs.iter().zip(outputs) {
                        owner[o] = Some(*q);
                    }
                    out.push(LogicalGate::toffoli(qs[0], qs[1], qs[2]));
                }
                Gate::Phase {
                    wire,
                    denom_exp,
                    negative,
                } => out.push(LogicalGate::Phase {
                    qubit: lookup(wire)?,
                    denom_exp,
                    negative,
                }),
            }
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("inputs {}\n", self.num_inputs);
        for g in self.logical_gates().expect("circuit invariants") {
            match g {
                LogicalGate::Toffoli { controls, target } => {
                    let _ = writeln!(s, "toff {} {} {}", controls[0], controls[1], target);
                }
                LogicalGate::Phase {
                    qubit,
                    denom_exp,
                    negative,
                } => {
                    let _ = writeln!(s, "phase {qubit} {denom_exp}{}", if negative { " neg" } else { "" });
                }
            }
        }
        s
    }

    /// Direct logical simulation on a state whose bit `q` is qubit `q`.
    pub fn simulate(&self, state: &SparseState) -> Result<SparseState> {
        if state.layout().total_bits() != self.num_inputs {
            return Err(Error::LayoutMismatch(format!(
                "circuit has {} inputs, state has {} bits",
                self.num_inputs,
                state.layout().total_bits()
            )));
        }
        let mut s = state.clone();
        for g in self.logical_gates()? {
            match g {
                LogicalGate::Toffoli { controls, target } => s.apply_classical(|b| {
                    let mut b = b.clone();
                    if b.get(controls[0]) && b.get(controls[1]) {
                        b.flip(target);
                    }
                    Ok(b)
                })?,
                LogicalGate::Phase {
                    qubit,
                    denom_exp,
                    negative,
                } => {
                    let sign = if negative { -1 } else { 1 };
                    s.apply_phase(1u64 << denom_exp, |b| if b.get(qubit) { sign } else { 0 });
                }
            }
        }
        Ok(s)
    }

    /// Classical evaluation on a basis input; phases are ignored.
    pub fn eval_classical(&self, input: &BitString) -> Result<BitString> {
        if input.len() != self.num_inputs {
            return Err(Error::LayoutMismatch("classical input width".into()));
        }
        let mut b = input.clone();
        for g in self.logical_gates()? {
            if let LogicalGate::Toffoli { controls, target } = g {
                if b.get(controls[0]) && b.get(controls[1]) {
                    b.flip(target);
                }
            }
        }
        Ok(b)
    }
}

/// A uniformly random logical circuit: each gate is a Toffoli on three
/// distinct qubits (when `num_qubits >= 3`) or a phase with exponent in
/// `0..=max_denom_exp` and random sign, with equal odds.
pub fn random_circuit<R: rand::Rng + ?Sized>(
    num_qubits: usize,
    num_gates: usize,
    max_denom_exp: u32,
    rng: &mut R,
) -> Result<CpCircuit> {
    if num_qubits == 0 {
        return Err(Error::InvalidParameter("random circuit needs a qubit".into()));
    }
    let mut gates = Vec::with_capacity(num_gates);
    for _ in 0..num_gates {
        if num_qubits >= 3 && rng.gen_bool(0.5) {
            let q = rand::seq::index::sample(rng, num_qubits, 3);
            gates.push(LogicalGate::toffoli(q.index(0), q.index(1), q.index(2)));
        } else {
            gates.push(LogicalGate::Phase {
                qubit: rng.gen_range(0..num_qubits),
                denom_exp: rng.gen_range(0..=max_denom_exp),
                negative: rng.gen_bool(0.5),
            });
        }
    }
    allocate_wires_bounded(num_qubits, &gates, max_denom_exp)
}

/// Parse the line-oriented circuit format.
pub fn parse_circuit(text: &str) -> Result<CpCircuit> {
    parse_circuit_bounded(text, DEFAULT_MAX_DENOM_EXP)
}

pub fn parse_circuit_bounded(text: &str, max_denom_exp: u32) -> Result<CpCircuit> {
    let mut inputs: Option<usize> = None;
    let mut gates = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let toks: Vec<&str> = line.split_whitespace().collect();
        let num = |t: &str| -> Result<usize> { t.parse().map_err(|_| err(format!("expected an integer, found {t:?}"))) };
        match toks[0] {
            "inputs" => {
                if inputs.is_some() {
                    return Err(err("duplicate inputs header".into()));
                }
                if toks.len() != 2 {
                    return Err(err("usage: inputs N".into()));
                }
                inputs = Some(num(toks[1])?);
            }
            "toff" | "phase" if inputs.is_none() => {
                return Err(err("gate before the inputs header".into()));
            }
            "toff" => {
                if toks.len() != 4 {
                    return Err(err("usage: toff a b c".into()));
                }
                let (a, b, c) = (num(toks[1])?, num(toks[2])?, num(toks[3])?);
                if a == b || a == c || b == c {
                    return Err(err("Toffoli repeats a qubit".into()));
                }
                let n = inputs.unwrap();
                if a.max(b).max(c) >= n {
                    return Err(err(format!("qubit index out of range for {n} inputs")));
                }
                gates.push(LogicalGate::toffoli(a, b, c));
            }
            "phase" => {
                let negative = match toks.len() {
                    3 => false,
                    4 if toks[3] == "neg" => true,
                    _ => return Err(err("usage: phase a d [neg]".into())),
                };
                let q = num(toks[1])?;
                let d: u32 = toks[2]
                    .parse()
                    .map_err(|_| err(format!("expected an exponent, found {:?}", toks[2])))?;
                if q >= inputs.unwrap() {
                    return Err(err("qubit index out of range".into()));
                }
                if d > max_denom_exp {
                    return Err(err(format!("phase exponent {d} exceeds bound {max_denom_exp}")));
                }
                gates.push(LogicalGate::Phase {
                    qubit: q,
                    denom_exp: d,
                    negative,
                });
            }
            other => return Err(err(format!("unknown directive {other:?}"))),
        }
    }
    let n = inputs.ok_or(Error::Parse {
        line: 0,
        msg: "missing inputs header".into(),
    })?;
    allocate_wires_bounded(n, &gates, max_denom_exp)
}
