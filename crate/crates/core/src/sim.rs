//! Execution of adaptive circuits: single-shot trajectories on the tableau or
//! state-vector backend, and exact expectations on branching density matrices.

use std::collections::BTreeMap;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CliffordGate, Op, RecordId};
use crate::dense::{check_cap, Channel, DensityMatrix, Operator, StateVector};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliOperator};
use crate::states::PreparableState;
use crate::tableau::StabilizerTableau;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Tableau,
    Dense,
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tableau" => Ok(Backend::Tableau),
            "dense" => Ok(Backend::Dense),
            other => Err(Error::param(format!("unknown backend `{other}` (tableau | dense)"))),
        }
    }
}

/// Instruction of an executable program.
#[derive(Clone, Debug, PartialEq)]
pub enum Instr {
    Apply(Channel),
    Measure { qubit: usize, record: RecordId },
    Conditional { record: RecordId, outcome: i8, channel: Channel },
    /// Signed combination of sub-programs; sampled with probability `|w|/Σ|w|`.
    Quasi(Vec<(f64, Vec<Instr>)>),
}

/// Circuit lowered to channels, with data qubits first and the magic register last.
#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub n_data: usize,
    pub n_magic: usize,
    pub num_records: usize,
    pub instrs: Vec<Instr>,
    pub observable: PauliOperator,
}

impl Program {
    /// Direct lowering; T markers become T unitaries.
    pub fn from_circuit(c: &Circuit) -> Program {
        let instrs = c
            .ops()
            .iter()
            .map(|op| match op {
                Op::Clifford(g) => Instr::Apply(Channel::Clifford(*g)),
                Op::T(q) => Instr::Apply(Channel::T(*q)),
                Op::MeasureZ { qubit, record } => Instr::Measure {
                    qubit: *qubit,
                    record: *record,
                },
                Op::Conditional { record, outcome, gate } => Instr::Conditional {
                    record: *record,
                    outcome: *outcome,
                    channel: Channel::Clifford(*gate),
                },
            })
            .collect();
        Program {
            n_data: c.n_data(),
            n_magic: c.n_magic(),
            num_records: c.num_records(),
            instrs,
            observable: c.observable().clone(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n_data + self.n_magic
    }

    /// Largest possible `|weight|` of one shot: product of quasi-node one-norms
    /// (maximized over branches for nested nodes).
    pub fn one_norm(&self) -> f64 {
        fn norm(instrs: &[Instr]) -> f64 {
            instrs
                .iter()
                .map(|i| match i {
                    Instr::Quasi(terms) => {
                        let total: f64 = terms.iter().map(|(w, _)| w.abs()).sum();
                        let inner = terms.iter().map(|(_, p)| norm(p)).fold(1.0, f64::max);
                        total * inner
                    }
                    _ => 1.0,
                })
                .product()
        }
        norm(&self.instrs)
    }
}

/// Outcomes of the mid-circuit measurements of one shot.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    entries: Vec<(RecordId, i8)>,
}

impl MeasurementRecord {
    pub fn push(&mut self, id: RecordId, outcome: i8) -> Result<()> {
        if self.get(id).is_some() {
            return Err(Error::InvalidCircuit(format!("record {} written twice", id.0)));
        }
        self.entries.push((id, outcome));
        Ok(())
    }

    pub fn get(&self, id: RecordId) -> Option<i8> {
        self.entries.iter().find(|(r, _)| *r == id).map(|(_, o)| *o)
    }

    pub fn entries(&self) -> &[(RecordId, i8)] {
        &self.entries
    }
}

/// One shot of the terminal Pauli measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct Shot {
    pub outcome: i8,
    pub records: MeasurementRecord,
    /// Product of `Σ|w| · sign(w)` over the sampled quasi nodes (1 without any).
    pub weight: f64,
    /// Noisy magic states consumed by the input preparation.
    pub magic_prepared: usize,
}

/// State placed on the magic register.
#[derive(Clone, Debug)]
pub enum MagicInput {
    /// Register left in `|0…0⟩`.
    Zero,
    /// Arbitrary density matrix, unravelled by sampling its eigenvectors.
    Density {
        rho: DensityMatrix,
        spectrum: Vec<(f64, Vec<C64>)>,
    },
    /// Preparable blocks placed one after another from the start of the register.
    Product { delta: f64, blocks: Vec<PreparableState> },
}

impl MagicInput {
    pub fn density(rho: DensityMatrix) -> Self {
        let spectrum = rho.spectral_mixture();
        MagicInput::Density { rho, spectrum }
    }

    pub fn product(delta: f64, blocks: Vec<PreparableState>) -> Self {
        MagicInput::Product { delta, blocks }
    }

    fn width(&self) -> Option<usize> {
        match self {
            MagicInput::Zero => None,
            MagicInput::Density { rho, .. } => Some(rho.num_qubits()),
            MagicInput::Product { blocks, .. } => Some(blocks.iter().map(|b| b.num_qubits()).sum()),
        }
    }

    fn check(&self, n_magic: usize) -> Result<()> {
        match self.width() {
            Some(w) if w > n_magic || (matches!(self, MagicInput::Density { .. }) && w != n_magic) => {
                Err(Error::DimensionMismatch { expected: n_magic, found: w })
            }
            _ => Ok(()),
        }
    }

    /// Exact register operator (unused register qubits in `|0⟩`).
    pub fn operator(&self, n_magic: usize) -> Result<Operator> {
        self.check(n_magic)?;
        let mut op = match self {
            MagicInput::Zero => Operator::identity(0)?,
            MagicInput::Density { rho, .. } => rho.operator().clone(),
            MagicInput::Product { delta, blocks } => {
                let mut op = Operator::identity(0)?;
                for b in blocks {
                    op = op.tensor(&b.density(*delta)?)?;
                }
                op
            }
        };
        let rest = n_magic - op.num_qubits();
        if rest > 0 {
            op = op.tensor(&Operator::basis_element(rest, 0, 0)?)?;
        }
        Ok(op)
    }
}

/// Operations a trajectory backend supports.
trait Trajectory {
    fn clifford(&mut self, g: &CliffordGate) -> Result<()>;
    fn t_gate(&mut self, q: usize) -> Result<()>;
    fn measure_z(&mut self, q: usize, rng: &mut dyn rand::RngCore) -> Result<i8>;
    fn observe(&mut self, p: &PauliOperator, rng: &mut dyn rand::RngCore) -> Result<i8>;

    fn pauli(&mut self, p: &PauliOperator) -> Result<()> {
        for q in p.support() {
            let g = match p.letter(q) {
                Pauli::X => CliffordGate::X(q),
                Pauli::Y => CliffordGate::Y(q),
                Pauli::Z => CliffordGate::Z(q),
                Pauli::I => continue,
            };
            self.clifford(&g)?;
        }
        Ok(())
    }

    fn random_pauli(&mut self, qubits: &[usize], n: usize, rng: &mut dyn rand::RngCore) -> Result<()> {
        let mut p = PauliOperator::identity(n);
        for &q in qubits {
            p.set_letter(q, Pauli::from_code(rng.gen_range(0..4)));
        }
        self.pauli(&p)
    }

    fn channel(&mut self, ch: &Channel, n: usize, rng: &mut dyn rand::RngCore) -> Result<()> {
        match ch {
            Channel::Clifford(g) => self.clifford(g),
            Channel::T(q) => self.t_gate(*q),
            Channel::Pauli(p) => self.pauli(p),
            Channel::Depolarize { delta, qubits } => {
                if rng.gen::<f64>() < *delta {
                    self.random_pauli(qubits, n, rng)?;
                }
                Ok(())
            }
            Channel::Dephase(q) => {
                if rng.gen::<bool>() {
                    self.clifford(&CliffordGate::Z(*q))?;
                }
                Ok(())
            }
            Channel::Sequence(cs) => cs.iter().try_for_each(|c| self.channel(c, n, rng)),
        }
    }
}

impl Trajectory for StabilizerTableau {
    fn clifford(&mut self, g: &CliffordGate) -> Result<()> {
        self.apply_gate(g)
    }

    fn t_gate(&mut self, _q: usize) -> Result<()> {
        Err(Error::param("tableau backend cannot apply non-Clifford T; gadgetize and inject magic states"))
    }

    fn measure_z(&mut self, q: usize, rng: &mut dyn rand::RngCore) -> Result<i8> {
        Ok(StabilizerTableau::measure_z(self, q, rng)?.outcome)
    }

    fn observe(&mut self, p: &PauliOperator, rng: &mut dyn rand::RngCore) -> Result<i8> {
        Ok(self.measure_pauli(p, rng)?.outcome)
    }
}

impl Trajectory for StateVector {
    fn clifford(&mut self, g: &CliffordGate) -> Result<()> {
        self.apply_clifford(g)
    }

    fn t_gate(&mut self, q: usize) -> Result<()> {
        self.apply_t(q)
    }

    fn measure_z(&mut self, q: usize, rng: &mut dyn rand::RngCore) -> Result<i8> {
        StateVector::measure_z(self, q, rng)
    }

    fn observe(&mut self, p: &PauliOperator, rng: &mut dyn rand::RngCore) -> Result<i8> {
        self.sample_pauli(p, rng)
    }
}

fn run_instrs<S: Trajectory>(
    state: &mut S,
    instrs: &[Instr],
    n: usize,
    records: &mut MeasurementRecord,
    weight: &mut f64,
    rng: &mut dyn rand::RngCore,
) -> Result<()> {
    for instr in instrs {
        match instr {
            Instr::Apply(ch) => state.channel(ch, n, rng)?,
            Instr::Measure { qubit, record } => {
                let m = state.measure_z(*qubit, rng)?;
                records.push(*record, m)?;
            }
            Instr::Conditional { record, outcome, channel } => {
                let m = records
                    .get(*record)
                    .ok_or_else(|| Error::InvalidCircuit(format!("record {} read before written", record.0)))?;
                if m == *outcome {
                    state.channel(channel, n, rng)?;
                }
            }
            Instr::Quasi(terms) => {
                let total: f64 = terms.iter().map(|(w, _)| w.abs()).sum();
                let u = rng.gen::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = terms.len() - 1;
                for (i, (w, _)) in terms.iter().enumerate() {
                    acc += w.abs();
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                let (w, sub) = &terms[pick];
                *weight *= total * w.signum();
                run_instrs(state, sub, n, records, weight, rng)?;
            }
        }
    }
    Ok(())
}

/// One shot of a lowered program.
pub fn run_program<R: Rng>(program: &Program, magic: &MagicInput, backend: Backend, rng: &mut R) -> Result<Shot> {
    magic.check(program.n_magic)?;
    let n = program.num_qubits();
    let offset = program.n_data;
    let mut records = MeasurementRecord::default();
    let mut weight = 1.0;
    let rng: &mut dyn rand::RngCore = rng;
    match backend {
        Backend::Tableau => {
            let mut tab = StabilizerTableau::new(n);
            let prepared = match magic {
                MagicInput::Zero => 0,
                MagicInput::Density { .. } => {
                    return Err(Error::param("tableau backend needs a stabilizer-preparable magic input"));
                }
                MagicInput::Product { blocks, .. } => {
                    let mut at = offset;
                    for b in blocks {
                        b.sample(rng).prepare_tableau(&mut tab, at)?;
                        at += b.num_qubits();
                    }
                    0
                }
            };
            run_instrs(&mut tab, &program.instrs, n, &mut records, &mut weight, rng)?;
            let outcome = tab.observe(&program.observable, rng)?;
            Ok(Shot {
                outcome,
                records,
                weight,
                magic_prepared: prepared,
            })
        }
        Backend::Dense => {
            check_cap(n)?;
            let mut sv = StateVector::zero_state(n)?;
            let prepared = match magic {
                MagicInput::Zero => 0,
                MagicInput::Density { spectrum, .. } => {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut pick = spectrum.len() - 1;
                    for (i, (p, _)) in spectrum.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            pick = i;
                            break;
                        }
                    }
                    let v = &spectrum[pick].1;
                    let mut amps = vec![C64::new(0.0, 0.0); 1usize << n];
                    for (k, a) in v.iter().enumerate() {
                        amps[k << offset] = *a;
                    }
                    sv = StateVector::from_amplitudes(amps)?;
                    0
                }
                MagicInput::Product { delta, blocks } => {
                    let mut at = offset;
                    let mut used = 0;
                    for b in blocks {
                        used += b.sample(rng).prepare_statevector(&mut sv, at, *delta, rng)?;
                        at += b.num_qubits();
                    }
                    used
                }
            };
            run_instrs(&mut sv, &program.instrs, n, &mut records, &mut weight, rng)?;
            let outcome = sv.observe(&program.observable, rng)?;
            Ok(Shot {
                outcome,
                records,
                weight,
                magic_prepared: prepared,
            })
        }
    }
}

/// One shot of a circuit (T markers allowed only on the dense backend).
pub fn run_adaptive<R: Rng>(circuit: &Circuit, magic: &MagicInput, backend: Backend, rng: &mut R) -> Result<Shot> {
    run_program(&Program::from_circuit(circuit), magic, backend, rng)
}

type Branches = BTreeMap<Vec<i8>, Operator>;

const BRANCH_DROP: f64 = 1e-15;

fn exact_instrs(instrs: &[Instr], mut branches: Branches) -> Result<Branches> {
    for instr in instrs {
        match instr {
            Instr::Apply(ch) => {
                for op in branches.values_mut() {
                    ch.apply(op)?;
                }
            }
            Instr::Measure { qubit, record } => {
                let mut next = Branches::new();
                for (key, op) in branches {
                    for outcome in [1i8, -1] {
                        let proj = op.project_z(*qubit, outcome)?;
                        if proj.data().iter().all(|v| v.norm() < BRANCH_DROP) {
                            continue;
                        }
                        let mut k = key.clone();
                        k[record.0] = outcome;
                        next.insert(k, proj);
                    }
                }
                branches = next;
            }
            Instr::Conditional { record, outcome, channel } => {
                for (key, op) in branches.iter_mut() {
                    if key[record.0] == *outcome {
                        channel.apply(op)?;
                    }
                }
            }
            Instr::Quasi(terms) => {
                let mut acc = Branches::new();
                for (w, sub) in terms {
                    for (key, op) in exact_instrs(sub, branches.clone())? {
                        match acc.get_mut(&key) {
                            Some(existing) => existing.add_scaled(&op, *w)?,
                            None => {
                                acc.insert(key, op.scaled(*w));
                            }
                        }
                    }
                }
                branches = acc;
            }
        }
    }
    Ok(branches)
}

/// `Σ_branches Tr(P ρ_branch)` for a (possibly non-positive) register input.
pub fn exact_expectation_with(program: &Program, magic: &Operator) -> Result<f64> {
    if magic.num_qubits() != program.n_magic {
        return Err(Error::DimensionMismatch {
            expected: program.n_magic,
            found: magic.num_qubits(),
        });
    }
    check_cap(program.num_qubits())?;
    let start = Operator::basis_element(program.n_data, 0, 0)?.tensor(magic)?;
    let mut branches = Branches::new();
    branches.insert(vec![0; program.num_records], start);
    let out = exact_instrs(&program.instrs, branches)?;
    let mut total = 0.0;
    for op in out.values() {
        total += op.expectation(&program.observable)?;
    }
    Ok(total)
}

/// Exact `⟨P⟩` of a circuit with the given register input.
pub fn exact_expectation(circuit: &Circuit, magic: &MagicInput) -> Result<f64> {
    let program = Program::from_circuit(circuit);
    exact_expectation_with(&program, &magic.operator(program.n_magic)?)
}

/// Exact `⟨P⟩` of the ideal circuit: T markers applied as unitaries,
/// magic register in `|0⟩`.
pub fn ideal_expectation(circuit: &Circuit) -> Result<f64> {
    exact_expectation(circuit, &MagicInput::Zero)
}

/// Sum over all branches of the full register state for an arbitrary input operator.
pub fn exact_output(program: &Program, input: &Operator) -> Result<Operator> {
    if input.num_qubits() != program.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: program.num_qubits(),
            found: input.num_qubits(),
        });
    }
    check_cap(program.num_qubits())?;
    let mut branches = Branches::new();
    branches.insert(vec![0; program.num_records], input.clone());
    let mut acc = Operator::zeros(program.num_qubits())?;
    for op in exact_instrs(&program.instrs, branches)?.values() {
        acc.add_scaled(op, 1.0)?;
    }
    Ok(acc)
}

/// Final (unnormalized-sum) density matrix of the data qubits, register traced out.
pub fn exact_output_state(circuit: &Circuit, magic: &MagicInput) -> Result<Operator> {
    let program = Program::from_circuit(circuit);
    let start = Operator::basis_element(program.n_data, 0, 0)?.tensor(&magic.operator(program.n_magic)?)?;
    exact_output(&program, &start)?.trace_out_high(program.n_magic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::gadgetize;
    use crate::io::parse_circuit;
    use crate::states::{tau, tau_delta, Preparation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn empty_circuit_measures_plus_one() {
        let c = parse_circuit("OBS Z0").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for backend in [Backend::Tableau, Backend::Dense] {
            let shot = run_adaptive(&c, &MagicInput::Zero, backend, &mut rng).unwrap();
            assert_eq!(shot.outcome, 1);
        }
    }

    #[test]
    fn gadget_with_tau_gives_t_state() {
        let c = gadgetize(&parse_circuit("H 0\nT 0\nOBS X0").unwrap());
        let out = exact_output_state(&c, &MagicInput::density(tau())).unwrap();
        let rho = DensityMatrix::new(out).unwrap();
        let b = rho.bloch().unwrap();
        assert!((b[0] - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((b[1] - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(b[2].abs() < 1e-12);
    }

    #[test]
    fn ideal_expectation_of_t_circuit() {
        let c = parse_circuit("H 0\nT 0\nOBS X0").unwrap();
        assert!((ideal_expectation(&c).unwrap() - FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn tableau_refuses_t_and_mixed_input() {
        let c = parse_circuit("H 0\nT 0\nOBS X0").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(run_adaptive(&c, &MagicInput::Zero, Backend::Tableau, &mut rng).is_err());
        let g = gadgetize(&c);
        let input = MagicInput::density(tau());
        assert!(run_adaptive(&g, &input, Backend::Tableau, &mut rng).is_err());
        let resource = MagicInput::product(0.1, vec![PreparableState::pure(Preparation::orbit(1, vec![0], vec![]))]);
        assert!(run_adaptive(&g, &resource, Backend::Tableau, &mut rng).is_err());
    }

    #[test]
    fn dense_cap() {
        let c = parse_circuit("H 12\nOBS Z0").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            run_adaptive(&c, &MagicInput::Zero, Backend::Dense, &mut rng),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn seeded_runs_repeat() {
        let c = gadgetize(&parse_circuit("H 0\nT 0\nH 0\nOBS Z0").unwrap());
        let input = MagicInput::density(tau_delta(0.2).unwrap());
        let shots = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200)
                .map(|_| run_adaptive(&c, &input, Backend::Dense, &mut rng).unwrap().outcome)
                .collect::<Vec<_>>()
        };
        assert_eq!(shots(5), shots(5));
        assert_ne!(shots(5), shots(6));
    }

    #[test]
    fn records_are_exposed() {
        let c = parse_circuit("X 0\nMZ 0 -> a\nIF a == -1: X 1\nOBS Z1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shot = run_adaptive(&c, &MagicInput::Zero, Backend::Tableau, &mut rng).unwrap();
        assert_eq!(shot.records.get(RecordId(0)), Some(-1));
        assert_eq!(shot.outcome, -1);
        assert!((ideal_expectation(&c).unwrap() + 1.0).abs() < 1e-12);
    }
}
