use super::{allocate_wires, CpCircuit, LogicalGate};
use crate::error::{Error, Result};

/// Accumulates logical gates. The gate set has no bare X or CNOT, so those
/// are emitted as Toffolis controlled by two constant-1 qubits that the
/// caller reserves with [`LogicalBuilder::set_constants`].
#[derive(Clone, Debug, Default)]
pub struct LogicalBuilder {
    num_qubits: usize,
    gates: Vec<LogicalGate>,
    ones: Option<[usize; 2]>,
}

impl LogicalBuilder {
    pub fn new(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            ..Self::default()
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[LogicalGate] {
        &self.gates
    }

    /// Reserve `n` more qubits and return their indices.
    pub fn alloc(&mut self, n: usize) -> Vec<usize> {
        let start = self.num_qubits;
        self.num_qubits += n;
        (start..start + n).collect()
    }

    /// Qubits that callers guarantee hold 1 on input.
    pub fn set_constants(&mut self, one_a: usize, one_b: usize) {
        self.ones = Some([one_a, one_b]);
    }

    fn ones(&self) -> [usize; 2] {
        self.ones.expect("constant-1 qubits not reserved")
    }

    pub fn toffoli(&mut self, c1: usize, c2: usize, t: usize) {
        self.gates.push(LogicalGate::toffoli(c1, c2, t));
    }

    pub fn phase(&mut self, q: usize, denom_exp: u32, negative: bool) {
        self.gates.push(LogicalGate::Phase {
            qubit: q,
            denom_exp,
            negative,
        });
    }

    pub fn cnot(&mut self, c: usize, t: usize) {
        let [one, _] = self.ones();
        self.toffoli(one, c, t);
    }

    pub fn x(&mut self, t: usize) {
        let [a, b] = self.ones();
        self.toffoli(a, b, t);
    }

    /// AND of `controls` into a chain of `controls.len() - 1` zeroed
    /// ancillas; returns the qubit holding the result. With one control the
    /// control itself is returned.
    pub fn and_ladder(&mut self, controls: &[usize], ancillas: &[usize]) -> usize {
        assert!(!controls.is_empty());
        assert!(ancillas.len() + 1 >= controls.len(), "not enough ancillas");
        if controls.len() == 1 {
            return controls[0];
        }
        self.toffoli(controls[0], controls[1], ancillas[0]);
        for k in 2..controls.len() {
            self.toffoli(ancillas[k - 2], controls[k], ancillas[k - 1]);
        }
        ancillas[controls.len() - 2]
    }

    pub fn undo_and_ladder(&mut self, controls: &[usize], ancillas: &[usize]) {
        if controls.len() < 2 {
            return;
        }
        for k in (2..controls.len()).rev() {
            self.toffoli(ancillas[k - 2], controls[k], ancillas[k - 1]);
        }
        self.toffoli(controls[0], controls[1], ancillas[0]);
    }

    /// Flip `target` when every control `(q, v)` has `q == v`.
    pub fn mcx(&mut self, controls: &[(usize, bool)], target: usize, ancillas: &[usize]) {
        for &(q, v) in controls {
            if !v {
                self.x(q);
            }
        }
        let qs: Vec<usize> = controls.iter().map(|c| c.0).collect();
        match qs.len() {
            0 => self.x(target),
            1 => self.cnot(qs[0], target),
            2 => self.toffoli(qs[0], qs[1], target),
            k => {
                let flag = self.and_ladder(&qs[..k - 1], ancillas);
                self.toffoli(flag, qs[k - 1], target);
                self.undo_and_ladder(&qs[..k - 1], ancillas);
            }
        }
        for &(q, v) in controls {
            if !v {
                self.x(q);
            }
        }
    }

    pub fn build(&self) -> Result<CpCircuit> {
        if let Some([a, b]) = self.ones {
            if a == b {
                return Err(Error::InvalidCircuit("constant qubits must differ".into()));
            }
        }
        allocate_wires(self.num_qubits, &self.gates)
    }
}
