//! Closed-form quasiprobability decompositions of `τ^⊗k` and of the noisy
//! T-gate and Clifford channels, with block products and exact checks.

use std::collections::HashMap;
use std::f64::consts::SQRT_2;
use std::str::FromStr;
use std::sync::{Once, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::circuit::{CliffordGate, RecordId};
use crate::dense::{choi_matrix, Channel, Operator};
use crate::error::{check_rate, Error, Result};
use crate::pauli::PauliOperator;
use crate::qrom::{qrom, qrom_warm, QuasiDecomposition, Term};
use crate::sim::{exact_output, Instr, Program};
use crate::states::{tau_delta, CandidateScope, PreparableState, Preparation, DELTA_TH};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatalogId {
    K1,
    T2r1,
    T2r2,
    T3r1,
    T3r3,
    ChanT,
    ChanC1,
    ChanC2,
}

impl CatalogId {
    pub const STATES: [CatalogId; 5] = [CatalogId::K1, CatalogId::T2r1, CatalogId::T2r2, CatalogId::T3r1, CatalogId::T3r3];

    /// `(t, r)` of a state entry; `None` for channels.
    pub fn arity(self) -> Option<(usize, usize)> {
        match self {
            CatalogId::K1 => Some((1, 1)),
            CatalogId::T2r1 => Some((2, 1)),
            CatalogId::T2r2 => Some((2, 2)),
            CatalogId::T3r1 => Some((3, 1)),
            CatalogId::T3r3 => Some((3, 3)),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CatalogId::K1 => "k1",
            CatalogId::T2r1 => "t2r1",
            CatalogId::T2r2 => "t2r2",
            CatalogId::T3r1 => "t3r1",
            CatalogId::T3r3 => "t3r3",
            CatalogId::ChanT => "chant",
            CatalogId::ChanC1 => "chanc1",
            CatalogId::ChanC2 => "chanc2",
        }
    }

    /// State entry for `t/r = ratio` with a single noisy state per block.
    pub fn for_ratio(ratio: usize) -> Result<CatalogId> {
        match ratio {
            1 => Ok(CatalogId::K1),
            2 => Ok(CatalogId::T2r1),
            3 => Ok(CatalogId::T3r1),
            _ => Err(Error::param(format!("ratio t/r = {ratio} not in the catalog (1, 2, 3)"))),
        }
    }
}

impl FromStr for CatalogId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let all = [
            CatalogId::K1,
            CatalogId::T2r1,
            CatalogId::T2r2,
            CatalogId::T3r1,
            CatalogId::T3r3,
            CatalogId::ChanT,
            CatalogId::ChanC1,
            CatalogId::ChanC2,
        ];
        all.into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param(format!("unknown catalog entry `{s}`")))
    }
}

#[derive(Clone, Copy)]
enum Local {
    Tau,
    ZTau,
    Plus,
    PlusI,
    Minus,
    MinusI,
}

fn put(p: &mut Preparation, q: usize, s: Local) {
    use CliffordGate::*;
    match s {
        Local::Tau => p.resource.push(q),
        Local::ZTau => {
            p.resource.push(q);
            p.gates.push(Z(q));
        }
        Local::Plus => p.gates.push(H(q)),
        Local::PlusI => p.gates.extend([H(q), S(q)]),
        Local::Minus => p.gates.extend([X(q), H(q)]),
        Local::MinusI => p.gates.extend([H(q), Sdg(q)]),
    }
}

fn locals(n: usize, parts: &[(usize, Local)]) -> Preparation {
    let mut p = Preparation::stabilizer(n, Vec::new());
    for &(q, s) in parts {
        put(&mut p, q, s);
    }
    p
}

/// `(|01⟩ − |10⟩)/√2` on `(a, b)`.
fn s1_gates(a: usize, b: usize) -> Vec<CliffordGate> {
    use CliffordGate::*;
    vec![H(a), Cnot(a, b), X(b), Z(a)]
}

/// `(|00⟩ − i|11⟩)/√2` on `(a, b)`.
fn s2_gates(a: usize, b: usize) -> Vec<CliffordGate> {
    use CliffordGate::*;
    vec![H(a), Cnot(a, b), Sdg(a)]
}

fn build(t: usize, r: usize, delta: f64, terms: Vec<(f64, PreparableState)>) -> Result<QuasiDecomposition> {
    let terms = terms
        .into_iter()
        .filter(|(w, _)| *w != 0.0)
        .map(|(weight, state)| Term { weight, state })
        .collect();
    QuasiDecomposition::new(t, r, delta, terms)
}

fn check_validated(delta: f64) -> Result<()> {
    check_rate("delta", delta)?;
    if delta > DELTA_TH {
        return Err(Error::param(format!(
            "δ = {delta} lies above the validated range [0, {DELTA_TH:.6}]"
        )));
    }
    Ok(())
}

/// `τ = (1-δ/2)/(1-δ) τ_δ − (δ/2)/(1-δ) Zτ_δZ`.
pub fn catalog_k1(delta: f64) -> Result<QuasiDecomposition> {
    check_rate("delta", delta)?;
    if delta >= 1.0 {
        return Err(Error::param("catalog_k1 needs δ < 1"));
    }
    let w1 = (1.0 - delta / 2.0) / (1.0 - delta);
    let w2 = -(delta / 2.0) / (1.0 - delta);
    build(
        1,
        1,
        delta,
        vec![
            (w1, PreparableState::pure(locals(1, &[(0, Local::Tau)]))),
            (w2, PreparableState::pure(locals(1, &[(0, Local::ZTau)]))),
        ],
    )
}

/// Coefficients `(q1, q2, q3, q4)` of the `t = 2, r = 1` decomposition.
pub fn t2r1_coefficients(delta: f64) -> [f64; 4] {
    let d = delta;
    let q12 = 0.5 - SQRT_2 / (1.0 + SQRT_2 - d);
    let den = -4.0 - 3.0 * SQRT_2 + (4.0 + 3.0 * SQRT_2) * d - 2.0 * d * d;
    let q3 = 2.0 * (1.0 + SQRT_2) * (d - 2.0) / den;
    let q4 = (-2.0 * d + 2.0 * SQRT_2 * d) / den;
    [q12, q12, q3, q4]
}

/// Rational closed form, kept for the runtime cross-check.
pub fn t2r1_rational_one_norm(delta: f64) -> f64 {
    let d = delta;
    (4.0 + 5.0 * SQRT_2 - SQRT_2 * d - 2.0 * d * d) / ((4.0 + 3.0 * SQRT_2) * (1.0 - d + 2.0 * d * d))
}

/// Closed form that matches `Σ|q_a|` of the coefficients.
pub fn t2r1_one_norm(delta: f64) -> f64 {
    let d = delta;
    (4.0 + 5.0 * SQRT_2 - SQRT_2 * d - 2.0 * d * d) / ((4.0 + 3.0 * SQRT_2) * (1.0 - d) + 2.0 * d * d)
}

static T2R1_WARNING: Once = Once::new();

pub fn catalog_t2r1(delta: f64) -> Result<QuasiDecomposition> {
    check_validated(delta)?;
    let q = t2r1_coefficients(delta);
    let eta3 = PreparableState::uniform(vec![
        locals(2, &[(0, Local::Tau), (1, Local::Plus)]),
        locals(2, &[(0, Local::Tau), (1, Local::PlusI)]),
        locals(2, &[(0, Local::Plus), (1, Local::Tau)]),
        locals(2, &[(0, Local::PlusI), (1, Local::Tau)]),
    ])?;
    let eta4 = PreparableState::uniform(vec![
        locals(2, &[(0, Local::ZTau), (1, Local::Minus)]),
        locals(2, &[(0, Local::ZTau), (1, Local::MinusI)]),
        locals(2, &[(0, Local::Minus), (1, Local::ZTau)]),
        locals(2, &[(0, Local::MinusI), (1, Local::ZTau)]),
    ])?;
    let d = build(
        2,
        1,
        delta,
        vec![
            (q[0], PreparableState::pure(Preparation::stabilizer(2, s1_gates(0, 1)))),
            (q[1], PreparableState::pure(Preparation::stabilizer(2, s2_gates(0, 1)))),
            (q[2], eta3),
            (q[3], eta4),
        ],
    )?;
    let rational = t2r1_rational_one_norm(delta);
    if (d.one_norm() - rational).abs() > 1e-9 {
        T2R1_WARNING.call_once(|| {
            log::warn!(
                "t2r1: rational-form negativity {rational:.10} differs from Σ|q| = {:.10} at δ = {delta}; using Σ|q|",
                d.one_norm()
            )
        });
    }
    Ok(d)
}

pub fn t2r2_one_norm(delta: f64) -> f64 {
    let d = delta;
    (2.0 - 2.0 * d * d + d.powi(3)) / (2.0 - 4.0 * d + 3.0 * d * d - d.powi(3))
}

pub fn catalog_t2r2(delta: f64) -> Result<QuasiDecomposition> {
    check_validated(delta)?;
    let d = delta;
    let q12 = (d - 2.0) * d / (2.0 * (2.0 - 2.0 * d + d * d));
    let den = 2.0 * (2.0 - 4.0 * d + 3.0 * d * d - d.powi(3));
    let q3 = (2.0 - d).powi(2) / den;
    let q4 = -d * d / den;
    build(
        2,
        2,
        delta,
        vec![
            (q12, PreparableState::pure(Preparation::stabilizer(2, s1_gates(0, 1)))),
            (q12, PreparableState::pure(Preparation::stabilizer(2, s2_gates(0, 1)))),
            (q3, PreparableState::pure(locals(2, &[(0, Local::Tau), (1, Local::Tau)]))),
            (q4, PreparableState::pure(locals(2, &[(0, Local::ZTau), (1, Local::ZTau)]))),
        ],
    )
}

pub fn t3r3_one_norm(delta: f64) -> f64 {
    let d = delta;
    (4.0 + 6.0 * d - 3.0 * d * d) / (4.0 - 6.0 * d + 3.0 * d * d - d.powi(3))
}

/// `τ_δ` (or `Zτ_δZ`) on one qubit and `ξ = ½(s1 + s2)` on the other two,
/// symmetrized over the three positions.
fn eta_tau_xi(rotated: bool) -> Result<PreparableState> {
    let mut comps = Vec::new();
    for pos in 0..3 {
        let others: Vec<usize> = (0..3).filter(|&q| q != pos).collect();
        for pair in [s1_gates(others[0], others[1]), s2_gates(others[0], others[1])] {
            let mut p = locals(3, &[(pos, if rotated { Local::ZTau } else { Local::Tau })]);
            p.gates.extend(pair);
            comps.push(p);
        }
    }
    PreparableState::uniform(comps)
}

pub fn catalog_t3r3(delta: f64) -> Result<QuasiDecomposition> {
    check_validated(delta)?;
    let d = delta;
    let den = (d - 1.0) * ((d - 2.0) * d + 4.0) * (3.0 * (d - 2.0) * d + 4.0);
    let q1 = 3.0 * (d - 2.0).powi(4) * d / (2.0 * den);
    let q2 = 3.0 * (d - 2.0) * d.powi(4) / (2.0 * den);
    let q3 = 2.0 * (d - 2.0).powi(3) / den;
    let q4 = 2.0 * d.powi(3) / den;
    build(
        3,
        3,
        delta,
        vec![
            (q1, eta_tau_xi(false)?),
            (q2, eta_tau_xi(true)?),
            (q3, PreparableState::pure(locals(3, &[(0, Local::Tau), (1, Local::Tau), (2, Local::Tau)]))),
            (q4, PreparableState::pure(locals(3, &[(0, Local::ZTau), (1, Local::ZTau), (2, Local::ZTau)]))),
        ],
    )
}

/// Fitted negativity of the `t = 3, r = 1` family.
pub fn t3r1_fit(delta: f64) -> f64 {
    let d = delta;
    (7.025 + 44.899 * d - 11.055 * d * d - 6.682 * d.powi(3)) / (4.025 + 22.561 * d - 25.664 * d * d + 6.682 * d.powi(3))
}

fn t3r1_cache() -> &'static RwLock<HashMap<u64, QuasiDecomposition>> {
    static CACHE: OnceLock<RwLock<HashMap<u64, QuasiDecomposition>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

const T3R1_REFERENCE_DELTA: f64 = 0.1;

/// LP over the `t = 3, r = 1` local-product family; cached per exact δ.
pub fn catalog_t3r1(delta: f64) -> Result<QuasiDecomposition> {
    check_validated(delta)?;
    let key = delta.to_bits();
    if let Some(d) = t3r1_cache().read().expect("cache lock").get(&key) {
        return Ok(d.clone());
    }
    let unexpected = |e| match e {
        Error::Infeasible(m) => Error::Numerical(format!("t3r1 LP infeasible (unexpected): {m}")),
        other => other,
    };
    let scope = CandidateScope::default_for(3, 1);
    // Every δ starts from the same reference basis so the vertex found depends on δ alone.
    static REFERENCE: OnceLock<Vec<usize>> = OnceLock::new();
    let hint = match REFERENCE.get() {
        Some(b) => b,
        None => {
            let (_, basis) = qrom_warm(3, 1, T3R1_REFERENCE_DELTA, scope, &[]).map_err(unexpected)?;
            REFERENCE.get_or_init(|| basis)
        }
    };
    let d = qrom_warm(3, 1, delta, scope, hint).map_err(unexpected)?.0.decomposition;
    t3r1_cache().write().expect("cache lock").insert(key, d.clone());
    Ok(d)
}

/// Stabilizer-only ℓ1-optimal decomposition of `τ^⊗k` (independent of δ).
pub fn rom_decomposition(k: usize) -> Result<QuasiDecomposition> {
    static CACHE: [OnceLock<QuasiDecomposition>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    if !(1..=3).contains(&k) {
        return Err(Error::Capacity(format!("stabilizer RoM decomposition supports k ≤ 3, got {k}")));
    }
    if let Some(d) = CACHE[k - 1].get() {
        return Ok(d.clone());
    }
    let d = qrom(k, 0, 0.0, CandidateScope::STABILIZERS_ONLY)?.decomposition;
    Ok(CACHE[k - 1].get_or_init(|| d).clone())
}

/// State entry with the above-threshold fallback: for `δ > δ_th` every entry
/// becomes the stabilizer-only decomposition (no magic states consumed).
pub fn state_entry(id: CatalogId, delta: f64) -> Result<QuasiDecomposition> {
    check_rate("delta", delta)?;
    let (k, _) = id
        .arity()
        .ok_or_else(|| Error::param(format!("{} is a channel entry", id.name())))?;
    if delta > DELTA_TH {
        let mut d = rom_decomposition(k)?;
        d.delta = delta;
        d.r = 0;
        return Ok(d);
    }
    match id {
        CatalogId::K1 => catalog_k1(delta),
        CatalogId::T2r1 => catalog_t2r1(delta),
        CatalogId::T2r2 => catalog_t2r2(delta),
        CatalogId::T3r1 => catalog_t3r1(delta),
        CatalogId::T3r3 => catalog_t3r3(delta),
        _ => unreachable!("channel ids have no arity"),
    }
}

/// Independent blocks covering `τ^⊗t`; the full decomposition is their tensor product.
#[derive(Clone, Debug)]
pub struct BlockDecomposition {
    pub t: usize,
    pub blocks: Vec<QuasiDecomposition>,
}

impl BlockDecomposition {
    pub fn one_norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.one_norm()).product()
    }

    /// Noisy magic states consumed by one sample (sum over blocks).
    pub fn magic_count(&self) -> usize {
        self.blocks.iter().map(|b| b.magic_count()).sum()
    }

    pub fn delta(&self) -> f64 {
        self.blocks.first().map_or(0.0, |b| b.delta)
    }

    /// Exact register operator `⊗_b Σ_x q_x η_x`.
    pub fn operator(&self) -> Result<Operator> {
        let mut op = Operator::identity(0)?;
        for b in &self.blocks {
            op = op.tensor(&b.reconstruct_dense()?)?;
        }
        Ok(op)
    }

    /// Materializes the tensor-product decomposition (`max_terms` guards size).
    pub fn expand(&self, max_terms: usize) -> Result<QuasiDecomposition> {
        let count: usize = self.blocks.iter().map(|b| b.terms().len()).product();
        if count > max_terms {
            return Err(Error::Capacity(format!("expanded decomposition would have {count} terms")));
        }
        let mut terms: Vec<(f64, Vec<(f64, Preparation)>, usize)> = vec![(1.0, vec![(1.0, Preparation::stabilizer(0, vec![]))], 0)];
        for b in &self.blocks {
            let mut next = Vec::new();
            for (w, comps, width) in &terms {
                for term in b.terms() {
                    let mut mixed = Vec::new();
                    for (p, prep) in comps {
                        for (p2, prep2) in term.state.components() {
                            let mut joined = prep.shifted(0, width + prep2.n);
                            let moved = prep2.shifted(*width, width + prep2.n);
                            joined.resource.extend(moved.resource);
                            joined.gates.extend(moved.gates);
                            mixed.push((p * p2, joined));
                        }
                    }
                    next.push((w * term.weight, mixed, width + term.state.num_qubits()));
                }
            }
            terms = next;
        }
        let r = self.blocks.iter().map(|b| b.r).sum();
        let out = terms
            .into_iter()
            .map(|(w, comps, _)| Ok(Term { weight: w, state: PreparableState::mixture(comps)? }))
            .collect::<Result<Vec<_>>>()?;
        QuasiDecomposition::new(self.t, r, self.delta(), out)
    }
}

/// `⌊t/k⌋` blocks of the entry plus `t mod k` single-copy blocks.
pub fn block_decomposition(t: usize, entry: CatalogId, delta: f64) -> Result<BlockDecomposition> {
    let (k, _) = entry
        .arity()
        .ok_or_else(|| Error::param(format!("{} is a channel entry", entry.name())))?;
    let mut blocks = Vec::new();
    if t / k > 0 {
        let block = state_entry(entry, delta)?;
        blocks.extend(std::iter::repeat_n(block, t / k));
    }
    if t % k > 0 {
        let single = state_entry(CatalogId::K1, delta)?;
        blocks.extend(std::iter::repeat_n(single, t % k));
    }
    Ok(BlockDecomposition { t, blocks })
}

/// Implementable channels appearing in the channel decompositions.
#[derive(Clone, Debug, PartialEq)]
pub enum ChannelTerm {
    /// Faulty injection gadget fed with `τ_δ`, or `Zτ_δZ` when `rotated`.
    NoisyT { rotated: bool },
    /// Full depolarization of the data qubit (random Pauli).
    Depolarize,
    /// Faulty target Clifford, followed by a Pauli on its qubits when given.
    NoisyClifford { pauli: Option<PauliOperator> },
}

#[derive(Clone, Debug)]
pub struct ChannelDecomposition {
    pub id: CatalogId,
    pub delta: f64,
    pub delta_c: f64,
    pub terms: Vec<(f64, ChannelTerm)>,
}

impl ChannelDecomposition {
    pub fn one_norm(&self) -> f64 {
        self.terms.iter().map(|(w, _)| w.abs()).sum()
    }

    pub fn weight_sum(&self) -> f64 {
        self.terms.iter().map(|(w, _)| w).sum()
    }

    /// Instructions for one T gate on `data` using ancilla `anc` and record `rec`.
    pub fn t_instrs(&self, term: &ChannelTerm, data: usize, anc: usize, rec: RecordId) -> Vec<Instr> {
        noisy_t_instrs(term, self.delta_c, data, anc, rec)
    }

    /// Channel for one Clifford gate.
    pub fn clifford_channel(&self, term: &ChannelTerm, gate: &CliffordGate) -> Channel {
        noisy_clifford_channel(term, self.delta_c, gate)
    }
}

pub(crate) fn noisy_t_instrs(term: &ChannelTerm, delta_c: f64, data: usize, anc: usize, rec: RecordId) -> Vec<Instr> {
    match term {
        ChannelTerm::NoisyT { rotated } => {
            let mut v = Vec::new();
            if *rotated {
                v.push(Instr::Apply(Channel::Clifford(CliffordGate::Z(anc))));
            }
            v.push(Instr::Apply(Channel::Clifford(CliffordGate::Cnot(data, anc))));
            if delta_c > 0.0 {
                v.push(Instr::Apply(Channel::Depolarize {
                    delta: delta_c,
                    qubits: vec![data, anc],
                }));
            }
            v.push(Instr::Measure { qubit: anc, record: rec });
            v.push(Instr::Conditional {
                record: rec,
                outcome: -1,
                channel: Channel::Clifford(CliffordGate::S(data)),
            });
            if delta_c > 0.0 {
                v.push(Instr::Apply(Channel::Depolarize {
                    delta: delta_c,
                    qubits: vec![data],
                }));
            }
            v
        }
        ChannelTerm::Depolarize => vec![
            Instr::Apply(Channel::Depolarize {
                delta: 1.0,
                qubits: vec![data],
            }),
            Instr::Measure { qubit: anc, record: rec },
        ],
        ChannelTerm::NoisyClifford { .. } => unreachable!("Clifford term in a T decomposition"),
    }
}

pub(crate) fn noisy_clifford_channel(term: &ChannelTerm, delta_c: f64, gate: &CliffordGate) -> Channel {
    let ChannelTerm::NoisyClifford { pauli } = term else {
        unreachable!("non-Clifford term in a Clifford decomposition")
    };
    let qubits = gate.qubits();
    let mut seq = vec![Channel::Clifford(*gate)];
    if let Some(p) = pauli {
        // `p` acts on the gate's qubits in order; lift it to gate positions.
        for (i, &q) in qubits.iter().enumerate() {
            let g = match p.letter(i) {
                crate::pauli::Pauli::I => continue,
                crate::pauli::Pauli::X => CliffordGate::X(q),
                crate::pauli::Pauli::Y => CliffordGate::Y(q),
                crate::pauli::Pauli::Z => CliffordGate::Z(q),
            };
            seq.push(Channel::Clifford(g));
        }
    }
    if delta_c > 0.0 {
        seq.push(Channel::Depolarize { delta: delta_c, qubits });
    }
    Channel::Sequence(seq)
}

fn check_channel_rates(delta: f64, delta_c: f64) -> Result<()> {
    check_rate("delta", delta)?;
    check_rate("delta_c", delta_c)?;
    if delta >= 1.0 || delta_c >= 1.0 {
        return Err(Error::param("channel decompositions need δ < 1 and δ_c < 1"));
    }
    Ok(())
}

/// `𝒯 = q1 𝒯_{δ,δc} + q2 𝒵∘𝒯_{δ,δc} + q3 𝒢`.
pub fn catalog_channel_t(delta: f64, delta_c: f64) -> Result<ChannelDecomposition> {
    check_channel_rates(delta, delta_c)?;
    let f = (1.0 - delta_c).powi(2);
    let q1 = (2.0 - delta) / (2.0 * (1.0 - delta) * f);
    let q2 = delta / (2.0 * (delta - 1.0) * f);
    let q3 = delta_c * (delta_c - 2.0) / f;
    let terms = [
        (q1, ChannelTerm::NoisyT { rotated: false }),
        (q2, ChannelTerm::NoisyT { rotated: true }),
        (q3, ChannelTerm::Depolarize),
    ]
    .into_iter()
    .filter(|(w, _)| *w != 0.0)
    .collect();
    Ok(ChannelDecomposition {
        id: CatalogId::ChanT,
        delta,
        delta_c,
        terms,
    })
}

/// Printed closed form of the T-channel one-norm.
pub fn channel_t_one_norm(delta: f64, delta_c: f64) -> f64 {
    (2.0 - delta) / ((1.0 - delta) * (1.0 - delta_c).powi(2)) - 1.0
}

/// `𝒰 = s1 𝒰_{δc} + s2 · avg_{P≠I} noisy(𝒫∘𝒰)` for `k`-qubit Cliffords.
pub fn catalog_channel_clifford(k: usize, delta_c: f64) -> Result<ChannelDecomposition> {
    check_channel_rates(0.0, delta_c)?;
    let id = match k {
        1 => CatalogId::ChanC1,
        2 => CatalogId::ChanC2,
        _ => return Err(Error::param(format!("Clifford channel decompositions cover k ∈ {{1, 2}}, got {k}"))),
    };
    let dim = (1usize << (2 * k)) as f64;
    let s1 = 1.0 + (dim - 1.0) * delta_c / (dim * (1.0 - delta_c));
    let s2 = -(dim - 1.0) * delta_c / (dim * (1.0 - delta_c));
    let mut terms = vec![(s1, ChannelTerm::NoisyClifford { pauli: None })];
    if s2 != 0.0 {
        for idx in 1..(1usize << (2 * k)) {
            terms.push((
                s2 / (dim - 1.0),
                ChannelTerm::NoisyClifford {
                    pauli: Some(PauliOperator::from_index(k, idx)),
                },
            ));
        }
    }
    Ok(ChannelDecomposition {
        id,
        delta: 0.0,
        delta_c,
        terms,
    })
}

/// Printed closed forms: `(1+δc/2)/(1-δc)` and `(1+7δc/8)/(1-δc)`.
pub fn channel_clifford_one_norm(k: usize, delta_c: f64) -> f64 {
    match k {
        1 => (1.0 + delta_c / 2.0) / (1.0 - delta_c),
        _ => (1.0 + 7.0 * delta_c / 8.0) / (1.0 - delta_c),
    }
}

/// Choi matrix of one term acting on the data qubit(s).
pub fn channel_term_choi(d: &ChannelDecomposition, term: &ChannelTerm) -> Result<Operator> {
    match d.id {
        CatalogId::ChanT => {
            let program = Program {
                n_data: 1,
                n_magic: 1,
                num_records: 1,
                instrs: noisy_t_instrs(term, d.delta_c, 0, 1, RecordId(0)),
                observable: PauliOperator::identity(2),
            };
            let tau = tau_delta(d.delta)?.into_operator();
            choi_matrix(1, |op| {
                let input = op.tensor(&tau)?;
                *op = exact_output(&program, &input)?.trace_out_high(1)?;
                Ok(())
            })
        }
        CatalogId::ChanC1 | CatalogId::ChanC2 => {
            let k = if d.id == CatalogId::ChanC1 { 1 } else { 2 };
            let gate = representative_gate(k);
            let ch = noisy_clifford_channel(term, d.delta_c, &gate);
            choi_matrix(k, |op| ch.apply(op))
        }
        _ => Err(Error::param("not a channel entry")),
    }
}

/// Gate used for Clifford-channel identity checks.
pub fn representative_gate(k: usize) -> CliffordGate {
    if k == 1 {
        CliffordGate::H(0)
    } else {
        CliffordGate::Cnot(0, 1)
    }
}

/// Choi matrix of the ideal target (T, H, or CNOT).
pub fn channel_target_choi(d: &ChannelDecomposition) -> Result<Operator> {
    match d.id {
        CatalogId::ChanT => choi_matrix(1, |op| op.apply_t(0)),
        CatalogId::ChanC1 => choi_matrix(1, |op| op.apply_clifford(&representative_gate(1))),
        CatalogId::ChanC2 => choi_matrix(2, |op| op.apply_clifford(&representative_gate(2))),
        _ => Err(Error::param("not a channel entry")),
    }
}

/// Max-norm distance between `Σ w_i Choi(term_i)` and the ideal Choi matrix.
pub fn channel_reconstruction_error(d: &ChannelDecomposition) -> Result<f64> {
    let target = channel_target_choi(d)?;
    let mut acc = Operator::zeros(target.num_qubits())?;
    for (w, term) in &d.terms {
        acc.add_scaled(&channel_term_choi(d, term)?, *w)?;
    }
    acc.max_abs_diff(&target)
}

/// Each term must be CPTP: Choi PSD (eigenvalues ≥ −1e-10) and trace preserving.
pub fn channel_terms_cptp(d: &ChannelDecomposition) -> Result<bool> {
    for (_, term) in &d.terms {
        let choi = channel_term_choi(d, term)?;
        let k = choi.num_qubits() / 2;
        if choi.hermitian_eigenvalues().first().copied().unwrap_or(0.0) < -1e-10 {
            return Ok(false);
        }
        let reduced = choi.trace_out_high(k)?;
        if reduced.max_abs_diff(&Operator::identity(k)?)? > 1e-10 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qrom::tau_power_vector;

    #[test]
    fn k1_weights() {
        let d = catalog_k1(0.2).unwrap();
        let w: Vec<f64> = d.terms().iter().map(|t| t.weight).collect();
        assert!((w[0] - 1.125).abs() < 1e-12 && (w[1] + 0.125).abs() < 1e-12);
        assert!((d.one_norm() - 1.25).abs() < 1e-12);
        assert_eq!(catalog_k1(0.0).unwrap().terms().len(), 1);
        assert!(catalog_k1(1.0).is_err());
        assert!(catalog_k1(0.3).unwrap().reconstruction_error() < 1e-12);
    }

    #[test]
    fn t2r1_rational_form_is_off() {
        let d = catalog_t2r1(0.1).unwrap();
        assert!((d.one_norm() - t2r1_one_norm(0.1)).abs() < 1e-12);
        assert!((d.one_norm() - 1.4666703523).abs() < 1e-9);
        assert!((t2r1_rational_one_norm(0.1) - d.one_norm()).abs() > 1e-2);
        assert!(d.reconstruction_error() < 1e-12);
    }

    #[test]
    fn t2r2_formula() {
        for delta in [0.0, 0.01, 0.1, 0.2, DELTA_TH] {
            let d = catalog_t2r2(delta).unwrap();
            assert!((d.one_norm() - t2r2_one_norm(delta)).abs() < 1e-12);
            assert!(d.reconstruction_error() < 1e-12);
        }
        assert!((t2r2_one_norm(0.01) - 1.0201510076).abs() < 1e-9);
        assert!(catalog_t2r2(0.3).is_err());
    }

    #[test]
    fn t3r3_formula() {
        let d = catalog_t3r3(0.01).unwrap();
        assert!((d.one_norm() - t3r3_one_norm(0.01)).abs() < 1e-12);
        assert!((d.one_norm() - 1.0303025227).abs() < 1e-9);
        let per_t = d.one_norm().powf(2.0 / 3.0);
        assert!((per_t - 1.0201).abs() < 1e-4);
        let d = catalog_t3r3(0.2).unwrap();
        assert!(d.reconstruct().max_abs_diff(&tau_power_vector(3)) < 1e-11);
    }

    #[test]
    fn channel_t_identity() {
        let d = catalog_channel_t(0.1, 0.05).unwrap();
        assert!((d.weight_sum() - 1.0).abs() < 1e-12);
        assert!((d.one_norm() - channel_t_one_norm(0.1, 0.05)).abs() < 1e-12);
        assert!(channel_reconstruction_error(&d).unwrap() < 1e-11);
        assert!(channel_terms_cptp(&d).unwrap());
        let ideal = catalog_channel_t(0.0, 0.0).unwrap();
        assert_eq!(ideal.terms.len(), 1);
    }

    #[test]
    fn clifford_channel_identity() {
        for k in [1, 2] {
            let d = catalog_channel_clifford(k, 0.01).unwrap();
            assert!((d.one_norm() - channel_clifford_one_norm(k, 0.01)).abs() < 1e-12);
            assert!(channel_reconstruction_error(&d).unwrap() < 1e-11);
            assert!(channel_terms_cptp(&d).unwrap());
        }
        assert_eq!(catalog_channel_clifford(1, 0.0).unwrap().terms.len(), 1);
    }

    #[test]
    fn fallback_above_threshold() {
        let d = state_entry(CatalogId::T2r2, 0.4).unwrap();
        assert!(d.is_stabilizer());
        assert!((d.one_norm() - 1.7475468957).abs() < 1e-7);
        let d = state_entry(CatalogId::K1, 0.4).unwrap();
        assert!((d.one_norm() - SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn blocks_multiply() {
        let b = block_decomposition(4, CatalogId::K1, 0.1).unwrap();
        assert!((b.one_norm() - (1.0f64 / 0.9).powi(4)).abs() < 1e-12);
        let b = block_decomposition(5, CatalogId::T2r2, 0.1).unwrap();
        assert_eq!(b.blocks.len(), 3);
        let expanded = b.expand(1000).unwrap();
        assert!((expanded.one_norm() - b.one_norm()).abs() < 1e-12);
        assert!(expanded.reconstruction_error() < 1e-12);
        let b2 = block_decomposition(2, CatalogId::T2r2, 0.1).unwrap();
        assert_eq!(b2.blocks[0], catalog_t2r2(0.1).unwrap());
    }

    #[test]
    fn ids_parse() {
        assert_eq!("t3r1".parse::<CatalogId>().unwrap(), CatalogId::T3r1);
        assert!("t4r1".parse::<CatalogId>().is_err());
    }
}

#[cfg(test)]
mod t3r1_tests {
    use super::*;

    #[test]
    fn t3r1_tracks_fit_and_caches() {
        let d = catalog_t3r1(0.01).unwrap();
        assert!((d.one_norm() - 1.758961).abs() < 1e-5);
        assert!(d.reconstruction_error() < 1e-9);
        assert!((d.one_norm() - t3r1_fit(0.01)).abs() < 2e-2);
        let again = catalog_t3r1(0.01).unwrap();
        assert_eq!(d, again);
    }
}
