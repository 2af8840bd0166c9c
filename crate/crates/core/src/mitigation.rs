//! Quasiprobability sampling: state-level and channel-level error mitigation
//! and quantum-assisted simulation, with Hoeffding sample counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{
    block_decomposition, catalog_channel_clifford, catalog_channel_t, noisy_clifford_channel, noisy_t_instrs,
    rom_decomposition, BlockDecomposition, CatalogId, ChannelDecomposition,
};
use crate::circuit::{gadgetize, Circuit, Op, RecordId};
use crate::dense::check_cap;
use crate::error::{check_rate, Error, Result};
use crate::sim::{exact_expectation_with, ideal_expectation, run_program, Backend, Instr, MagicInput, Program};
use crate::states::{NoiseModel, PreparableState, Preparation};

/// Smallest `M` with `M ≥ 2 ln(2/ε) ‖q‖₁² / Δ²`.
pub fn hoeffding_samples(epsilon: f64, target: f64, one_norm: f64) -> Result<usize> {
    check_hoeffding(epsilon, target)?;
    if !(one_norm >= 1.0) || !one_norm.is_finite() {
        return Err(Error::param(format!("one-norm must be a finite value ≥ 1, got {one_norm}")));
    }
    let m = 2.0 * (2.0 / epsilon).ln() * one_norm * one_norm / (target * target);
    if m > usize::MAX as f64 / 2.0 {
        return Err(Error::Capacity(format!("sample count {m:.3e} is not representable")));
    }
    // Guard against ceil() rounding a product that is an integer up to +1.
    let rounded = m.round();
    if (m - rounded).abs() <= 1e-9 * m.max(1.0) {
        return Ok(rounded.max(1.0) as usize);
    }
    Ok(m.ceil().max(1.0) as usize)
}

/// Half-width `Δ` guaranteed at confidence `1 − ε` by `M` samples.
pub fn hoeffding_halfwidth(epsilon: f64, samples: usize, one_norm: f64) -> f64 {
    one_norm * (2.0 * (2.0 / epsilon).ln() / samples as f64).sqrt()
}

fn check_hoeffding(epsilon: f64, target: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::param(format!("ε must lie in (0, 1], got {epsilon}")));
    }
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::param(format!("Δ must be positive, got {target}")));
    }
    Ok(())
}

/// Confidence parameters and seeding shared by all protocols.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub epsilon: f64,
    pub target: f64,
    pub seed: u64,
    /// Explicit sample count; accepted only when at least the Hoeffding count.
    pub samples: Option<usize>,
    pub keep_outputs: bool,
}

impl Sampling {
    pub fn new(epsilon: f64, target: f64, seed: u64) -> Self {
        Sampling {
            epsilon,
            target,
            seed,
            samples: None,
            keep_outputs: false,
        }
    }
}

/// How the noisy resources enter the protocol.
#[derive(Clone, Debug)]
pub enum Mode {
    /// Magic register sampled from a product of block decompositions.
    States(BlockDecomposition),
    /// Every gate replaced by its channel decomposition.
    Channels {
        noise: NoiseModel,
        t: ChannelDecomposition,
        c1: ChannelDecomposition,
        c2: ChannelDecomposition,
    },
    /// Noisy states injected as they are (biased reference).
    Unmitigated { delta: f64 },
}

#[derive(Clone, Debug)]
pub struct MitigationPlan {
    /// Circuit as given (T markers allowed).
    pub source: Circuit,
    /// Gadgetized circuit.
    pub circuit: Circuit,
    pub mode: Mode,
    pub epsilon: f64,
    pub target: f64,
    pub samples: usize,
    pub seed: u64,
    pub keep_outputs: bool,
    program: Program,
}

impl MitigationPlan {
    fn finish(source: &Circuit, mode: Mode, program: Program, sampling: &Sampling) -> Result<Self> {
        check_hoeffding(sampling.epsilon, sampling.target)?;
        let mut plan = MitigationPlan {
            source: source.clone(),
            circuit: gadgetize(source),
            mode,
            epsilon: sampling.epsilon,
            target: sampling.target,
            samples: 0,
            seed: sampling.seed,
            keep_outputs: sampling.keep_outputs,
            program,
        };
        let needed = hoeffding_samples(plan.epsilon, plan.target, plan.one_norm())?;
        plan.samples = match sampling.samples {
            Some(m) if m < needed => {
                return Err(Error::param(format!(
                    "requested M = {m} is below the Hoeffding count {needed}; M may only be raised"
                )))
            }
            Some(m) => m,
            None => needed,
        };
        Ok(plan)
    }

    /// State-level mitigation with the given blocks covering the whole magic register.
    pub fn states(source: &Circuit, blocks: BlockDecomposition, sampling: &Sampling) -> Result<Self> {
        let g = gadgetize(source);
        let width: usize = blocks.blocks.iter().map(|b| b.t).sum();
        if width != g.n_magic() {
            return Err(Error::DimensionMismatch {
                expected: g.n_magic(),
                found: width,
            });
        }
        let program = Program::from_circuit(&g);
        Self::finish(source, Mode::States(blocks), program, sampling)
    }

    /// State-level mitigation with one catalog entry tiled over the register.
    pub fn from_catalog(source: &Circuit, entry: CatalogId, delta: f64, sampling: &Sampling) -> Result<Self> {
        let t = gadgetize(source).n_magic();
        Self::states(source, block_decomposition(t, entry, delta)?, sampling)
    }

    /// Channel-level mitigation of every T gate and Clifford gate.
    pub fn channels(source: &Circuit, noise: NoiseModel, sampling: &Sampling) -> Result<Self> {
        if source.n_magic() > 0 {
            return Err(Error::param(
                "channel mitigation expects T markers, not an explicit magic register",
            ));
        }
        let t = catalog_channel_t(noise.delta, noise.delta_c)?;
        let c1 = catalog_channel_clifford(1, noise.delta_c)?;
        let c2 = catalog_channel_clifford(2, noise.delta_c)?;
        let program = channel_program(source, &t, &c1, &c2);
        Self::finish(source, Mode::Channels { noise, t, c1, c2 }, program, sampling)
    }

    /// Noisy states injected without any correction.
    pub fn unmitigated(source: &Circuit, delta: f64, sampling: &Sampling) -> Result<Self> {
        check_rate("delta", delta)?;
        let program = Program::from_circuit(&gadgetize(source));
        Self::finish(source, Mode::Unmitigated { delta }, program, sampling)
    }

    /// Product one-norm over all blocks or gates.
    pub fn one_norm(&self) -> f64 {
        match &self.mode {
            Mode::States(b) => b.one_norm(),
            Mode::Channels { .. } => self.program.one_norm(),
            Mode::Unmitigated { .. } => 1.0,
        }
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    fn noisy_register(&self, delta: f64) -> MagicInput {
        let tau = PreparableState::pure(Preparation::orbit(1, vec![0], vec![]));
        MagicInput::product(delta, vec![tau; self.program.n_magic])
    }

    /// One weighted shot: `(sign of the output, magic states prepared)`.
    fn shot(&self, backend: Backend, rng: &mut ChaCha8Rng) -> Result<(i8, usize)> {
        match &self.mode {
            Mode::States(blocks) => {
                let mut sign = 1i8;
                let mut chosen = Vec::with_capacity(blocks.blocks.len());
                for b in &blocks.blocks {
                    let (idx, s) = b.sample_term(rng);
                    if s < 0.0 {
                        sign = -sign;
                    }
                    chosen.push(b.terms()[idx].state.clone());
                }
                let magic = MagicInput::product(blocks.delta(), chosen);
                let shot = run_program(&self.program, &magic, backend, rng)?;
                Ok((sign * shot.outcome, shot.magic_prepared))
            }
            Mode::Channels { noise, .. } => {
                if backend != Backend::Dense {
                    return Err(Error::param(
                        "channel mitigation needs the dense backend (noisy channels are not stabilizer operations)",
                    ));
                }
                let shot = run_program(&self.program, &self.noisy_register(noise.delta), backend, rng)?;
                let sign = if shot.weight < 0.0 { -1 } else { 1 };
                Ok((sign * shot.outcome, shot.magic_prepared))
            }
            Mode::Unmitigated { delta } => {
                let shot = run_program(&self.program, &self.noisy_register(*delta), backend, rng)?;
                Ok((shot.outcome, shot.magic_prepared))
            }
        }
    }

    /// Runs all `M` samples in parallel with per-sample RNG streams.
    pub fn run(&self, backend: Backend) -> Result<EstimatorResult> {
        if backend == Backend::Dense {
            check_cap(self.program.num_qubits())?;
        }
        let seed = self.seed;
        let sample = |i: usize| -> Result<(i8, usize)> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            self.shot(backend, &mut rng)
        };
        let norm = self.one_norm();
        let (plus, max_magic, outputs) = if self.keep_outputs {
            let signs: Vec<(i8, usize)> = (0..self.samples).into_par_iter().map(sample).collect::<Result<_>>()?;
            let plus = signs.iter().filter(|(s, _)| *s > 0).count();
            let max_magic = signs.iter().map(|(_, m)| *m).max().unwrap_or(0);
            let outputs = signs.iter().map(|(s, _)| f64::from(*s) * norm).collect();
            (plus, max_magic, Some(outputs))
        } else {
            let (plus, max_magic) = (0..self.samples)
                .into_par_iter()
                .map(|i| sample(i).map(|(s, m)| (usize::from(s > 0), m)))
                .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1.max(b.1))))?;
            (plus, max_magic, None)
        };
        let minus = self.samples - plus;
        let mean = (plus as f64 - minus as f64) * norm / self.samples as f64;
        Ok(EstimatorResult {
            mean,
            samples: self.samples,
            one_norm: norm,
            hoeffding_halfwidth: hoeffding_halfwidth(self.epsilon, self.samples, norm),
            epsilon: self.epsilon,
            seed: self.seed,
            max_magic_per_run: max_magic,
            outputs,
            ideal: None,
        })
    }

    /// Exact value of the estimator's expectation, `Σ_x q_x ⟨P⟩(η_x)`,
    /// evaluated by linearity on the dense oracle.
    pub fn exact_mean(&self) -> Result<f64> {
        check_cap(self.program.num_qubits())?;
        let register = match &self.mode {
            Mode::States(blocks) => {
                let op = blocks.operator()?;
                let rest = self.program.n_magic - op.num_qubits();
                if rest > 0 {
                    op.tensor(&crate::dense::Operator::basis_element(rest, 0, 0)?)?
                } else {
                    op
                }
            }
            Mode::Channels { noise, .. } => self.noisy_register(noise.delta).operator(self.program.n_magic)?,
            Mode::Unmitigated { delta } => self.noisy_register(*delta).operator(self.program.n_magic)?,
        };
        exact_expectation_with(&self.program, &register)
    }

    /// Ideal `⟨P⟩` of the source circuit.
    pub fn ideal(&self) -> Result<f64> {
        ideal_expectation(&self.source)
    }
}

/// Lowers a circuit with T markers to a program of channel decompositions.
fn channel_program(
    source: &Circuit,
    t: &ChannelDecomposition,
    c1: &ChannelDecomposition,
    c2: &ChannelDecomposition,
) -> Program {
    let g = gadgetize(source);
    let mut ancilla = source.num_qubits();
    let mut next_record = 0usize;
    let mut remap = vec![0usize; source.num_records()];
    let pick = |arity: usize| if arity == 1 { c1 } else { c2 };
    let mut instrs = Vec::new();
    for op in source.ops() {
        match op {
            Op::Clifford(gate) => {
                let d = pick(gate.arity());
                instrs.push(Instr::Quasi(
                    d.terms
                        .iter()
                        .map(|(w, term)| (*w, vec![Instr::Apply(noisy_clifford_channel(term, d.delta_c, gate))]))
                        .collect(),
                ));
            }
            Op::T(q) => {
                let rec = RecordId(next_record);
                next_record += 1;
                instrs.push(Instr::Quasi(
                    t.terms
                        .iter()
                        .map(|(w, term)| (*w, noisy_t_instrs(term, t.delta_c, *q, ancilla, rec)))
                        .collect(),
                ));
                ancilla += 1;
            }
            Op::MeasureZ { qubit, record } => {
                remap[record.0] = next_record;
                instrs.push(Instr::Measure {
                    qubit: *qubit,
                    record: RecordId(next_record),
                });
                next_record += 1;
            }
            Op::Conditional { record, outcome, gate } => {
                let d = pick(gate.arity());
                let record = RecordId(remap[record.0]);
                instrs.push(Instr::Quasi(
                    d.terms
                        .iter()
                        .map(|(w, term)| {
                            (
                                *w,
                                vec![Instr::Conditional {
                                    record,
                                    outcome: *outcome,
                                    channel: noisy_clifford_channel(term, d.delta_c, gate),
                                }],
                            )
                        })
                        .collect(),
                ));
            }
        }
    }
    Program {
        n_data: g.n_data(),
        n_magic: g.n_magic(),
        num_records: g.num_records(),
        instrs,
        observable: g.observable().clone(),
    }
}

/// Output of a sampling run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub mean: f64,
    pub samples: usize,
    pub one_norm: f64,
    pub hoeffding_halfwidth: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Largest number of noisy magic states consumed by a single run.
    pub max_magic_per_run: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub outputs: Option<Vec<f64>>,
    /// Ideal `⟨P⟩` from the dense oracle, when it was computed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ideal: Option<f64>,
}

/// State-level mitigation (one catalog entry tiled over the register).
pub fn mitigate_states(plan: &MitigationPlan, backend: Backend) -> Result<EstimatorResult> {
    if !matches!(plan.mode, Mode::States(_)) {
        return Err(Error::param("plan does not carry state decompositions"));
    }
    plan.run(backend)
}

/// Channel-level mitigation; dense backend only.
pub fn mitigate_channels(plan: &MitigationPlan, backend: Backend) -> Result<EstimatorResult> {
    if !matches!(plan.mode, Mode::Channels { .. }) {
        return Err(Error::param("plan does not carry channel decompositions"));
    }
    if backend != Backend::Dense {
        return Err(Error::param(
            "channel mitigation needs the dense backend (noisy channels are not stabilizer operations)",
        ));
    }
    plan.run(backend)
}

/// Exact estimator expectation (no sampling).
pub fn exact_estimator_mean(plan: &MitigationPlan) -> Result<f64> {
    plan.exact_mean()
}

/// How many T gates share one noisy state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assist {
    /// `k = t/r ∈ {1, 2, 3}`; remainder T gates use single-copy blocks.
    Ratio(usize),
    /// `r = 0`: stabilizer-only decomposition, purely classical.
    Classical,
}

/// Plan for simulating a circuit with fewer noisy states than T gates.
pub fn assist_plan(circuit: &Circuit, assist: Assist, delta: f64, sampling: &Sampling) -> Result<MitigationPlan> {
    let t = gadgetize(circuit).n_magic();
    let blocks = match assist {
        Assist::Ratio(k) => block_decomposition(t, CatalogId::for_ratio(k)?, delta)?,
        Assist::Classical => {
            let mut blocks = Vec::new();
            let mut left = t;
            while left > 0 {
                let k = left.min(3);
                let mut d = rom_decomposition(k)?;
                d.delta = delta;
                blocks.push(d);
                left -= k;
            }
            BlockDecomposition { t, blocks }
        }
    };
    MitigationPlan::states(circuit, blocks, sampling)
}

/// Quantum-assisted estimate of `⟨P⟩`.
pub fn quantum_assist(
    circuit: &Circuit,
    assist: Assist,
    delta: f64,
    sampling: &Sampling,
    backend: Backend,
) -> Result<EstimatorResult> {
    assist_plan(circuit, assist, delta, sampling)?.run(backend)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_circuit;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn hoeffding_counts() {
        assert_eq!(hoeffding_samples(0.05, 0.05, 1.0).unwrap(), 2952);
        let m = hoeffding_samples(1.0, 0.1, 1.0).unwrap();
        assert_eq!(m, (2.0 * 2f64.ln() / 0.01).ceil() as usize);
        assert!(hoeffding_samples(0.0, 0.1, 1.0).is_err());
        assert!(hoeffding_samples(0.1, 0.0, 1.0).is_err());
        assert!(hoeffding_samples(0.1, 0.1, 0.5).is_err());
        assert!(hoeffding_halfwidth(0.05, 2952, 1.0) <= 0.05);
    }

    #[test]
    fn k1_exact_mean_is_ideal() {
        let c = parse_circuit("H 0\nT 0\nOBS X0").unwrap();
        let s = Sampling::new(0.05, 0.05, 1);
        let plan = MitigationPlan::from_catalog(&c, CatalogId::K1, 0.2, &s).unwrap();
        assert!((plan.exact_mean().unwrap() - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((plan.one_norm() - 1.25).abs() < 1e-12);
        assert_eq!(plan.samples, 4612);
        let raw = MitigationPlan::unmitigated(&c, 0.2, &s).unwrap();
        assert!((raw.exact_mean().unwrap() - 0.8 * FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn sampled_mean_within_halfwidth() {
        let c = parse_circuit("H 0\nT 0\nOBS X0").unwrap();
        let mut s = Sampling::new(0.05, 0.05, 7);
        s.keep_outputs = true;
        let plan = MitigationPlan::from_catalog(&c, CatalogId::K1, 0.2, &s).unwrap();
        let res = mitigate_states(&plan, Backend::Dense).unwrap();
        assert!((res.mean - FRAC_1_SQRT_2).abs() < 0.05);
        assert!(res.outputs.unwrap().iter().all(|o| o.abs() == res.one_norm));
        assert_eq!(res.max_magic_per_run, 1);
    }

    #[test]
    fn channel_mode_needs_dense() {
        let c = parse_circuit("H 0\nT 0\nOBS X0").unwrap();
        let s = Sampling::new(0.1, 0.2, 1);
        let plan = MitigationPlan::channels(&c, NoiseModel::new(0.1, 0.01, 0.0).unwrap(), &s).unwrap();
        assert!(mitigate_channels(&plan, Backend::Tableau).is_err());
        assert!((plan.exact_mean().unwrap() - FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn classical_path_uses_tableau() {
        let c = parse_circuit("H 0\nT 0\nOBS X0").unwrap();
        let s = Sampling::new(0.1, 0.1, 3);
        let plan = assist_plan(&c, Assist::Classical, 0.0, &s).unwrap();
        assert!((plan.one_norm() - std::f64::consts::SQRT_2).abs() < 1e-9);
        assert!((plan.exact_mean().unwrap() - FRAC_1_SQRT_2).abs() < 1e-9);
        let res = plan.run(Backend::Tableau).unwrap();
        assert_eq!(res.max_magic_per_run, 0);
        assert!((res.mean - FRAC_1_SQRT_2).abs() < 0.1);
    }

    #[test]
    fn samples_only_raised() {
        let c = parse_circuit("H 0\nOBS X0").unwrap();
        let mut s = Sampling::new(0.05, 0.05, 1);
        s.samples = Some(10);
        assert!(MitigationPlan::from_catalog(&c, CatalogId::K1, 0.1, &s).is_err());
        s.samples = Some(5000);
        let plan = MitigationPlan::from_catalog(&c, CatalogId::K1, 0.1, &s).unwrap();
        assert_eq!(plan.samples, 5000);
        assert_eq!(plan.one_norm(), 1.0);
        assert_eq!(plan.run(Backend::Tableau).unwrap().mean, 1.0);
    }
}
