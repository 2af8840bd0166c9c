//! Adaptive Clifford+T circuits and the T-gate teleportation gadget.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliOperator};

/// Clifford gates understood by both simulation backends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CliffordGate {
    H(usize),
    S(usize),
    Sdg(usize),
    X(usize),
    Y(usize),
    Z(usize),
    Cnot(usize, usize),
    Cz(usize, usize),
}

impl CliffordGate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            CliffordGate::H(a)
            | CliffordGate::S(a)
            | CliffordGate::Sdg(a)
            | CliffordGate::X(a)
            | CliffordGate::Y(a)
            | CliffordGate::Z(a) => vec![a],
            CliffordGate::Cnot(a, b) | CliffordGate::Cz(a, b) => vec![a, b],
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            CliffordGate::Cnot(..) | CliffordGate::Cz(..) => 2,
            _ => 1,
        }
    }

    pub fn max_qubit(&self) -> usize {
        self.qubits().into_iter().max().unwrap_or(0)
    }

    /// Same gate with qubit indices passed through `f`.
    pub fn remap(&self, f: impl Fn(usize) -> usize) -> CliffordGate {
        match *self {
            CliffordGate::H(a) => CliffordGate::H(f(a)),
            CliffordGate::S(a) => CliffordGate::S(f(a)),
            CliffordGate::Sdg(a) => CliffordGate::Sdg(f(a)),
            CliffordGate::X(a) => CliffordGate::X(f(a)),
            CliffordGate::Y(a) => CliffordGate::Y(f(a)),
            CliffordGate::Z(a) => CliffordGate::Z(f(a)),
            CliffordGate::Cnot(a, b) => CliffordGate::Cnot(f(a), f(b)),
            CliffordGate::Cz(a, b) => CliffordGate::Cz(f(a), f(b)),
        }
    }

    pub fn inverse(&self) -> CliffordGate {
        match *self {
            CliffordGate::S(a) => CliffordGate::Sdg(a),
            CliffordGate::Sdg(a) => CliffordGate::S(a),
            g => g,
        }
    }

    pub(crate) fn check(&self, n: usize) -> Result<()> {
        for q in self.qubits() {
            if q >= n {
                return Err(Error::QubitOutOfRange { index: q, n });
            }
        }
        if let CliffordGate::Cnot(a, b) | CliffordGate::Cz(a, b) = *self {
            if a == b {
                return Err(Error::InvalidCircuit(format!("two-qubit gate on repeated qubit {a}")));
            }
        }
        Ok(())
    }

    pub fn mnemonic(&self) -> &'static str {
        match self {
            CliffordGate::H(_) => "H",
            CliffordGate::S(_) => "S",
            CliffordGate::Sdg(_) => "SDG",
            CliffordGate::X(_) => "X",
            CliffordGate::Y(_) => "Y",
            CliffordGate::Z(_) => "Z",
            CliffordGate::Cnot(..) => "CNOT",
            CliffordGate::Cz(..) => "CZ",
        }
    }
}

impl std::fmt::Display for CliffordGate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.mnemonic())?;
        for q in self.qubits() {
            write!(f, " {q}")?;
        }
        Ok(())
    }
}

/// Index of a classical measurement record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordId(pub usize);

/// One circuit instruction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    Clifford(CliffordGate),
    /// Marker for a T gate, removed by [`gadgetize`].
    T(usize),
    MeasureZ { qubit: usize, record: RecordId },
    /// Clifford applied when the named record equals `outcome` (±1).
    Conditional {
        record: RecordId,
        outcome: i8,
        gate: CliffordGate,
    },
}

/// Ordered instruction list over `n_data` data qubits followed by `n_magic`
/// magic-register qubits, terminated by the measurement of one Pauli.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_data: usize,
    n_magic: usize,
    ops: Vec<Op>,
    record_names: Vec<String>,
    observable: PauliOperator,
}

impl Circuit {
    /// Validates and builds a circuit. Record ids must be dense `0..k` in the
    /// order they are first produced.
    pub fn new(
        n_data: usize,
        n_magic: usize,
        ops: Vec<Op>,
        record_names: Vec<String>,
        observable: PauliOperator,
    ) -> Result<Circuit> {
        let c = Circuit {
            n_data,
            n_magic,
            ops,
            record_names,
            observable,
        };
        c.validate()?;
        Ok(c)
    }

    /// Convenience constructor that names records `m0, m1, …`.
    pub fn from_ops(n_data: usize, n_magic: usize, ops: Vec<Op>, observable: PauliOperator) -> Result<Circuit> {
        let records = ops
            .iter()
            .filter(|op| matches!(op, Op::MeasureZ { .. }))
            .count();
        let names = (0..records).map(|i| format!("m{i}")).collect();
        Circuit::new(n_data, n_magic, ops, names, observable)
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_qubits();
        if self.observable.num_qubits() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.observable.num_qubits(),
            });
        }
        if !self.observable.is_hermitian() {
            return Err(Error::InvalidCircuit("observable must be Hermitian".into()));
        }
        let mut produced = 0usize;
        for op in &self.ops {
            match op {
                Op::Clifford(g) => g.check(n)?,
                Op::T(q) => {
                    if *q >= n {
                        return Err(Error::QubitOutOfRange { index: *q, n });
                    }
                }
                Op::MeasureZ { qubit, record } => {
                    if *qubit >= n {
                        return Err(Error::QubitOutOfRange { index: *qubit, n });
                    }
                    if record.0 != produced {
                        return Err(Error::InvalidCircuit(format!(
                            "record {} produced out of order",
                            record.0
                        )));
                    }
                    produced += 1;
                }
                Op::Conditional { record, outcome, gate } => {
                    gate.check(n)?;
                    if record.0 >= produced {
                        return Err(Error::InvalidCircuit(format!(
                            "conditional references record {} before it is measured",
                            record.0
                        )));
                    }
                    if *outcome != 1 && *outcome != -1 {
                        return Err(Error::InvalidCircuit("conditional outcome must be ±1".into()));
                    }
                }
            }
        }
        if self.record_names.len() != produced {
            return Err(Error::InvalidCircuit("record name table does not match measurements".into()));
        }
        Ok(())
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn n_magic(&self) -> usize {
        self.n_magic
    }

    pub fn num_qubits(&self) -> usize {
        self.n_data + self.n_magic
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn observable(&self) -> &PauliOperator {
        &self.observable
    }

    pub fn record_names(&self) -> &[String] {
        &self.record_names
    }

    pub fn num_records(&self) -> usize {
        self.record_names.len()
    }

    pub fn t_count(&self) -> usize {
        self.ops.iter().filter(|op| matches!(op, Op::T(_))).count()
    }

    /// Number of `(one-qubit, two-qubit)` Clifford gates, conditionals included.
    pub fn clifford_counts(&self) -> (usize, usize) {
        let mut counts = (0, 0);
        for op in &self.ops {
            let gate = match op {
                Op::Clifford(g) => g,
                Op::Conditional { gate, .. } => gate,
                _ => continue,
            };
            if gate.arity() == 1 {
                counts.0 += 1;
            } else {
                counts.1 += 1;
            }
        }
        counts
    }

    pub fn is_clifford_only(&self) -> bool {
        self.t_count() == 0
    }
}

/// Random circuit over `n_data` qubits: `n_cliffords` Cliffords with `t` T
/// markers interleaved, measured on a random non-identity Pauli.
pub fn random_circuit<R: Rng + ?Sized>(n_data: usize, t: usize, n_cliffords: usize, rng: &mut R) -> Circuit {
    assert!(n_data > 0, "random circuits need at least one qubit");
    let one = |q: usize, k: usize| match k {
        0 => CliffordGate::H(q),
        1 => CliffordGate::S(q),
        2 => CliffordGate::Sdg(q),
        3 => CliffordGate::X(q),
        4 => CliffordGate::Y(q),
        _ => CliffordGate::Z(q),
    };
    let mut ops = Vec::with_capacity(n_cliffords + t);
    for _ in 0..n_cliffords {
        let q = rng.gen_range(0..n_data);
        if n_data > 1 && rng.gen_bool(0.3) {
            let mut b = rng.gen_range(0..n_data - 1);
            if b >= q {
                b += 1;
            }
            ops.push(Op::Clifford(if rng.gen_bool(0.5) {
                CliffordGate::Cnot(q, b)
            } else {
                CliffordGate::Cz(q, b)
            }));
        } else {
            ops.push(Op::Clifford(one(q, rng.gen_range(0..6))));
        }
    }
    for _ in 0..t {
        let at = rng.gen_range(0..=ops.len());
        ops.insert(at, Op::T(rng.gen_range(0..n_data)));
    }
    let mut obs = PauliOperator::identity(n_data);
    while obs.support().is_empty() {
        for q in 0..n_data {
            obs.set_letter(q, Pauli::from_code(rng.gen_range(0..4)));
        }
    }
    Circuit::from_ops(n_data, 0, ops, obs).expect("random circuit is valid")
}

/// Replaces every T marker by the teleportation gadget.
///
/// The i-th T marker (in program order) on qubit `q` consumes magic-register
/// qubit `n_data + n_magic + i` and becomes `CNOT q→a; MZ a; IF m == -1: S q`.
pub fn gadgetize(circuit: &Circuit) -> Circuit {
    let t = circuit.t_count();
    if t == 0 {
        return circuit.clone();
    }
    let old_n = circuit.num_qubits();
    let mut names = Vec::with_capacity(circuit.num_records() + t);
    let mut ops = Vec::with_capacity(circuit.ops.len() + 2 * t);
    let mut remap = vec![0usize; circuit.num_records()];
    let mut ancilla = old_n;
    for op in &circuit.ops {
        match op {
            Op::T(q) => {
                let record = RecordId(names.len());
                names.push(format!("t{}", ancilla - circuit.n_data));
                ops.push(Op::Clifford(CliffordGate::Cnot(*q, ancilla)));
                ops.push(Op::MeasureZ { qubit: ancilla, record });
                ops.push(Op::Conditional {
                    record,
                    outcome: -1,
                    gate: CliffordGate::S(*q),
                });
                ancilla += 1;
            }
            Op::MeasureZ { qubit, record } => {
                remap[record.0] = names.len();
                ops.push(Op::MeasureZ {
                    qubit: *qubit,
                    record: RecordId(names.len()),
                });
                names.push(circuit.record_names[record.0].clone());
            }
            Op::Conditional { record, outcome, gate } => ops.push(Op::Conditional {
                record: RecordId(remap[record.0]),
                outcome: *outcome,
                gate: *gate,
            }),
            other => ops.push(other.clone()),
        }
    }
    let mut obs = PauliOperator::identity(old_n + t).with_phase(circuit.observable.phase());
    for q in 0..old_n {
        obs.set_letter(q, circuit.observable.letter(q));
    }
    Circuit::new(circuit.n_data, circuit.n_magic + t, ops, names, obs)
        .expect("gadgetized circuit is structurally valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Pauli;

    fn obs(n: usize, q: usize, p: Pauli) -> PauliOperator {
        PauliOperator::single(n, q, p).unwrap()
    }

    #[test]
    fn rejects_unproduced_record() {
        let ops = vec![Op::Conditional {
            record: RecordId(0),
            outcome: -1,
            gate: CliffordGate::S(0),
        }];
        assert!(Circuit::new(1, 0, ops, vec![], obs(1, 0, Pauli::Z)).is_err());
    }

    #[test]
    fn rejects_bad_index() {
        let ops = vec![Op::Clifford(CliffordGate::Cnot(0, 3))];
        assert!(Circuit::from_ops(2, 0, ops, obs(2, 0, Pauli::Z)).is_err());
    }

    #[test]
    fn gadgetize_without_t_is_identity() {
        let c = Circuit::from_ops(1, 0, vec![Op::Clifford(CliffordGate::H(0))], obs(1, 0, Pauli::X)).unwrap();
        assert_eq!(gadgetize(&c), c);
    }

    #[test]
    fn gadgetize_two_t_markers() {
        let ops = vec![
            Op::Clifford(CliffordGate::H(0)),
            Op::T(0),
            Op::MeasureZ { qubit: 1, record: RecordId(0) },
            Op::T(1),
            Op::Conditional { record: RecordId(0), outcome: 1, gate: CliffordGate::X(0) },
        ];
        let c = Circuit::from_ops(2, 0, ops, obs(2, 0, Pauli::X)).unwrap();
        let g = gadgetize(&c);
        assert_eq!(g.t_count(), 0);
        assert_eq!(g.n_magic(), 2);
        assert_eq!(g.num_qubits(), 4);
        let conds: Vec<_> = g
            .ops()
            .iter()
            .filter_map(|op| match op {
                Op::Conditional { gate: CliffordGate::S(q), outcome: -1, record } => Some((*q, *record)),
                _ => None,
            })
            .collect();
        assert_eq!(conds, vec![(0, RecordId(0)), (1, RecordId(2))]);
        // first ancilla is qubit 2, second is qubit 3, in T order
        assert!(g.ops().contains(&Op::Clifford(CliffordGate::Cnot(0, 2))));
        assert!(g.ops().contains(&Op::Clifford(CliffordGate::Cnot(1, 3))));
        // the user conditional still points at the user measurement
        assert!(g.ops().contains(&Op::Conditional { record: RecordId(1), outcome: 1, gate: CliffordGate::X(0) }));
        assert_eq!(g.record_names(), &["t0".to_string(), "m0".into(), "t1".into()]);
    }
}
