//! Magic and stabilizer states, Pauli-vector columns, preparable states and
//! the candidate sets fed to the LP.

use std::collections::{HashMap, HashSet, VecDeque};
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::CliffordGate;
use crate::dense::{DensityMatrix, Operator, StateVector};
use crate::error::{check_rate, Error, Result};
use crate::pauli::PauliOperator;
use crate::tableau::StabilizerTableau;

/// Depolarizing rate at which `τ_δ` becomes a stabilizer mixture.
pub const DELTA_TH: f64 = 1.0 - FRAC_1_SQRT_2;

/// Ideal magic state `|T⟩⟨T|`.
pub fn tau() -> DensityMatrix {
    tau_delta(0.0).expect("δ = 0 is valid")
}

/// `(1-δ) τ + δ I/2`.
pub fn tau_delta(delta: f64) -> Result<DensityMatrix> {
    check_rate("delta", delta)?;
    let a = (1.0 - delta) * FRAC_1_SQRT_2;
    Ok(DensityMatrix::assume_valid(bloch_operator([a, a, 0.0])))
}

/// Single-qubit `(I + r·σ)/2`.
pub(crate) fn bloch_operator(r: [f64; 3]) -> Operator {
    let mut op = Operator::zeros(1).expect("one qubit");
    op.set(0, 0, C64::new(0.5 * (1.0 + r[2]), 0.0));
    op.set(1, 1, C64::new(0.5 * (1.0 - r[2]), 0.0));
    op.set(0, 1, C64::new(0.5 * r[0], -0.5 * r[1]));
    op.set(1, 0, C64::new(0.5 * r[0], 0.5 * r[1]));
    op
}

/// Noise rates: magic states, data Cliffords, distillation Cliffords.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub delta: f64,
    pub delta_c: f64,
    pub delta_cd: f64,
}

impl NoiseModel {
    pub fn new(delta: f64, delta_c: f64, delta_cd: f64) -> Result<Self> {
        check_rate("delta", delta)?;
        check_rate("delta_c", delta_c)?;
        check_rate("delta_cd", delta_cd)?;
        Ok(NoiseModel { delta, delta_c, delta_cd })
    }
}

/// Vector of Pauli expectations `Tr(σ ρ)`, indexed like [`PauliOperator::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct PauliVector {
    n: usize,
    entries: Vec<f64>,
}

impl PauliVector {
    /// Checks the length and that the identity entry is 1.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != 1usize << (2 * n) {
            return Err(Error::DimensionMismatch {
                expected: 1usize << (2 * n),
                found: entries.len(),
            });
        }
        if (entries[0] - 1.0).abs() > 1e-12 {
            return Err(Error::Numerical(format!("identity coordinate {} ≠ 1", entries[0])));
        }
        Ok(PauliVector { n, entries })
    }

    pub(crate) fn from_raw(n: usize, entries: Vec<f64>) -> Self {
        PauliVector { n, entries }
    }

    pub fn from_operator(op: &Operator) -> Self {
        PauliVector {
            n: op.num_qubits(),
            entries: op.pauli_coordinates(),
        }
    }

    pub fn from_density(rho: &DensityMatrix) -> Self {
        Self::from_operator(rho.operator())
    }

    pub fn zero_state(n: usize) -> Self {
        let mut entries = vec![0.0; 1usize << (2 * n)];
        for mask in 0usize..(1 << n) {
            // products of Z on the qubits in `mask`
            let idx: usize = (0..n).filter(|q| mask >> q & 1 == 1).map(|q| 3 << (2 * q)).sum();
            entries[idx] = 1.0;
        }
        PauliVector { n, entries }
    }

    pub fn from_bloch(r: [f64; 3]) -> Self {
        PauliVector {
            n: 1,
            entries: vec![1.0, r[0], r[1], r[2]],
        }
    }

    pub fn tau_delta(delta: f64) -> Self {
        let a = (1.0 - delta) * FRAC_1_SQRT_2;
        Self::from_bloch([a, a, 0.0])
    }

    /// Signed stabilizer group of a tableau as a vector.
    pub fn from_tableau(tab: &StabilizerTableau) -> Self {
        let n = tab.num_qubits();
        let mut entries = vec![0.0; 1usize << (2 * n)];
        for p in tab.stabilizer_group() {
            let s = p.phase().sign().expect("stabilizer elements are Hermitian");
            entries[p.index()] = s as f64;
        }
        PauliVector { n, entries }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.entries[idx]
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum()
    }

    /// Kronecker product with `self` on the low qubits.
    pub fn tensor(&self, high: &PauliVector) -> PauliVector {
        let lo = self.entries.len();
        let mut entries = Vec::with_capacity(lo * high.entries.len());
        for h in &high.entries {
            entries.extend(self.entries.iter().map(|l| l * h));
        }
        PauliVector {
            n: self.n + high.n,
            entries,
        }
    }

    /// Vector of `C ρ C†` where `clifford` was built from the identity tableau by gates.
    pub fn clifford_image(&self, clifford: &StabilizerTableau) -> PauliVector {
        let mut entries = vec![0.0; self.entries.len()];
        for (idx, &v) in self.entries.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let img = clifford.conjugate_pauli(&PauliOperator::from_index(self.n, idx));
            let s = img.phase().sign().expect("Clifford images of Hermitian Paulis are Hermitian");
            entries[img.index()] = s as f64 * v;
        }
        PauliVector { n: self.n, entries }
    }

    /// Applies gates one by one (slower than [`Self::clifford_image`] but needs no tableau).
    pub fn apply_gates(&self, gates: &[CliffordGate]) -> PauliVector {
        let mut out = self.clone();
        for g in gates {
            let mut next = vec![0.0; out.entries.len()];
            for (idx, &v) in out.entries.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let mut p = PauliOperator::from_index(self.n, idx);
                p.conjugate_by(g);
                next[p.index()] = p.phase().sign().expect("Hermitian image") as f64 * v;
            }
            out.entries = next;
        }
        out
    }

    pub fn to_operator(&self) -> Result<Operator> {
        Operator::from_pauli_coordinates(self.n, &self.entries)
    }

    pub fn max_abs_diff(&self, other: &PauliVector) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Dedup key: coordinates rounded to 9 decimals.
    pub fn key(&self) -> Vec<i64> {
        self.entries.iter().map(|v| (v * 1e9).round() as i64).collect()
    }
}

/// Pure-or-resource preparation: `|0…0⟩`, replace the `resource` qubits by
/// fresh noisy magic states `τ_δ`, then apply `gates`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preparation {
    pub n: usize,
    pub resource: Vec<usize>,
    pub gates: Vec<CliffordGate>,
}

impl Preparation {
    pub fn stabilizer(n: usize, gates: Vec<CliffordGate>) -> Self {
        Preparation {
            n,
            resource: Vec::new(),
            gates,
        }
    }

    pub fn orbit(n: usize, resource: Vec<usize>, gates: Vec<CliffordGate>) -> Self {
        Preparation { n, resource, gates }
    }

    pub fn is_stabilizer(&self) -> bool {
        self.resource.is_empty()
    }

    pub fn magic_count(&self) -> usize {
        self.resource.len()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for &q in &self.resource {
            if q >= self.n {
                return Err(Error::QubitOutOfRange { index: q, n: self.n });
            }
            if !seen.insert(q) {
                return Err(Error::param(format!("resource qubit {q} listed twice")));
            }
        }
        self.gates.iter().try_for_each(|g| g.check(self.n))
    }

    /// Places this preparation on qubits `offset..offset+n` of a wider register.
    pub fn shifted(&self, offset: usize, width: usize) -> Preparation {
        Preparation {
            n: width,
            resource: self.resource.iter().map(|q| q + offset).collect(),
            gates: self.gates.iter().map(|g| g.remap(|q| q + offset)).collect(),
        }
    }

    /// Input product vector before the gates.
    fn seed_vector(&self, delta: f64) -> PauliVector {
        let mut v = PauliVector::from_raw(0, vec![1.0]);
        for q in 0..self.n {
            let f = if self.resource.contains(&q) {
                PauliVector::tau_delta(delta)
            } else {
                PauliVector::zero_state(1)
            };
            v = v.tensor(&f);
        }
        v
    }

    pub fn pauli_vector(&self, delta: f64) -> PauliVector {
        self.seed_vector(delta).apply_gates(&self.gates)
    }

    /// Exact density matrix, built on the dense oracle.
    pub fn density(&self, delta: f64) -> Result<Operator> {
        let tau = tau_delta(delta)?.into_operator();
        let zero = Operator::basis_element(1, 0, 0)?;
        let mut op = Operator::identity(0)?;
        for q in 0..self.n {
            let f = if self.resource.contains(&q) { &tau } else { &zero };
            op = op.tensor(f)?;
        }
        for g in &self.gates {
            op.apply_clifford(g)?;
        }
        Ok(op)
    }

    /// Prepares a pure trajectory on qubits `offset..` of `sv` (assumed `|0⟩` there).
    /// Returns the number of noisy magic states consumed.
    pub fn prepare_statevector<R: Rng + ?Sized>(
        &self,
        sv: &mut StateVector,
        offset: usize,
        delta: f64,
        rng: &mut R,
    ) -> Result<usize> {
        for &q in &self.resource {
            let q = q + offset;
            if rng.gen::<f64>() < 1.0 - delta {
                sv.apply_clifford(&CliffordGate::H(q))?;
                sv.apply_t(q)?;
            } else if rng.gen::<bool>() {
                sv.apply_clifford(&CliffordGate::X(q))?;
            }
        }
        for g in &self.gates {
            sv.apply_clifford(&g.remap(|q| q + offset))?;
        }
        Ok(self.resource.len())
    }

    /// Applies the preparation on a tableau; refuses resource states.
    pub fn prepare_tableau(&self, tab: &mut StabilizerTableau, offset: usize) -> Result<()> {
        if !self.is_stabilizer() {
            return Err(Error::param(
                "tableau backend cannot prepare non-stabilizer resource states",
            ));
        }
        for g in &self.gates {
            tab.apply_gate(&g.remap(|q| q + offset))?;
        }
        Ok(())
    }

    /// Recipe in the circuit text format; `RESOURCE q` lines mark `τ_δ` inputs.
    pub fn recipe_text(&self) -> String {
        let mut s = String::new();
        for q in &self.resource {
            let _ = writeln!(s, "RESOURCE {q}");
        }
        for g in &self.gates {
            let _ = writeln!(s, "{g}");
        }
        s
    }
}

/// Probability mixture of preparations on the same number of qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparableState {
    n: usize,
    components: Vec<(f64, Preparation)>,
}

impl PreparableState {
    pub fn pure(prep: Preparation) -> Self {
        PreparableState {
            n: prep.n,
            components: vec![(1.0, prep)],
        }
    }

    pub fn mixture(components: Vec<(f64, Preparation)>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::param("empty mixture"));
        };
        let n = first.1.n;
        let mut total = 0.0;
        for (p, prep) in &components {
            if *p < 0.0 || !p.is_finite() {
                return Err(Error::param(format!("mixture weight {p} is negative")));
            }
            if prep.n != n {
                return Err(Error::DimensionMismatch { expected: n, found: prep.n });
            }
            prep.validate()?;
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param(format!("mixture weights sum to {total}")));
        }
        Ok(PreparableState { n, components })
    }

    /// Uniform mixture.
    pub fn uniform(preps: Vec<Preparation>) -> Result<Self> {
        let p = 1.0 / preps.len().max(1) as f64;
        Self::mixture(preps.into_iter().map(|x| (p, x)).collect())
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[(f64, Preparation)] {
        &self.components
    }

    pub fn is_stabilizer(&self) -> bool {
        self.components.iter().all(|(_, c)| c.is_stabilizer())
    }

    /// Largest number of magic states any single component consumes.
    pub fn magic_count(&self) -> usize {
        self.components.iter().map(|(_, c)| c.magic_count()).max().unwrap_or(0)
    }

    pub fn pauli_vector(&self, delta: f64) -> PauliVector {
        let mut acc = vec![0.0; 1usize << (2 * self.n)];
        for (p, c) in &self.components {
            for (a, v) in acc.iter_mut().zip(c.pauli_vector(delta).entries) {
                *a += p * v;
            }
        }
        PauliVector::from_raw(self.n, acc)
    }

    pub fn density(&self, delta: f64) -> Result<Operator> {
        let mut acc = Operator::zeros(self.n)?;
        for (p, c) in &self.components {
            acc.add_scaled(&c.density(delta)?, *p)?;
        }
        Ok(acc)
    }

    /// Samples a mixture component.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &Preparation {
        if self.components.len() == 1 {
            return &self.components[0].1;
        }
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (p, c) in &self.components {
            acc += p;
            if u < acc {
                return c;
            }
        }
        &self.components.last().expect("non-empty").1
    }
}

/// A Clifford unitary as a gate word over {H, S, CNOT} with its tableau.
#[derive(Clone, Debug)]
pub struct CliffordElement {
    pub gates: Vec<CliffordGate>,
    pub tableau: StabilizerTableau,
}

fn generators(n: usize) -> Vec<CliffordGate> {
    let mut g = Vec::new();
    for q in 0..n {
        g.push(CliffordGate::H(q));
        g.push(CliffordGate::S(q));
    }
    for a in 0..n {
        for b in 0..n {
            if a != b {
                g.push(CliffordGate::Cnot(a, b));
            }
        }
    }
    g
}

fn bfs_cliffords(n: usize) -> Vec<CliffordElement> {
    let gens = generators(n);
    let start = StabilizerTableau::new(n);
    let mut seen = HashSet::new();
    seen.insert(start.key());
    let mut out = vec![CliffordElement {
        gates: Vec::new(),
        tableau: start,
    }];
    let mut head = 0;
    while head < out.len() {
        for g in &gens {
            let next = out[head].tableau.clone().applied(g).expect("generator in range");
            if seen.insert(next.key()) {
                let mut gates = out[head].gates.clone();
                gates.push(*g);
                out.push(CliffordElement { gates, tableau: next });
            }
        }
        head += 1;
    }
    out
}

/// The Clifford group modulo phase on `n ∈ {1, 2}` qubits (24 and 11520 elements).
/// The identity comes first.
pub fn enumerate_clifford_group(n: usize) -> Result<&'static [CliffordElement]> {
    static ONE: OnceLock<Vec<CliffordElement>> = OnceLock::new();
    static TWO: OnceLock<Vec<CliffordElement>> = OnceLock::new();
    match n {
        1 => Ok(ONE.get_or_init(|| bfs_cliffords(1))),
        2 => Ok(TWO.get_or_init(|| bfs_cliffords(2))),
        _ => Err(Error::Capacity(format!("Clifford group enumeration supports n ∈ {{1, 2}}, got {n}"))),
    }
}

/// Pure stabilizer state with a preparation circuit from `|0…0⟩`.
#[derive(Clone, Debug)]
pub struct StabilizerState {
    pub gates: Vec<CliffordGate>,
    pub vector: PauliVector,
}

impl StabilizerState {
    pub fn preparation(&self) -> Preparation {
        Preparation::stabilizer(self.vector.num_qubits(), self.gates.clone())
    }
}

fn bfs_stabilizer_states(n: usize) -> Vec<StabilizerState> {
    let gens = generators(n);
    let start = StabilizerTableau::new(n);
    let v0 = PauliVector::from_tableau(&start);
    let mut seen = HashSet::new();
    seen.insert(v0.key());
    let mut out = vec![StabilizerState {
        gates: Vec::new(),
        vector: v0,
    }];
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some((tab, idx)) = queue.pop_front() {
        for g in &gens {
            let next = tab.clone().applied(g).expect("generator in range");
            let v = PauliVector::from_tableau(&next);
            if seen.insert(v.key()) {
                let mut gates = out[idx].gates.clone();
                gates.push(*g);
                out.push(StabilizerState { gates, vector: v });
                queue.push_back((next, out.len() - 1));
            }
        }
    }
    out
}

/// All pure stabilizer states on `n ∈ {1, 2, 3}` qubits (6, 60, 1080); `|0…0⟩` first.
pub fn enumerate_stabilizer_states(n: usize) -> Result<&'static [StabilizerState]> {
    static CACHE: [OnceLock<Vec<StabilizerState>>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    if !(1..=3).contains(&n) {
        return Err(Error::Capacity(format!("stabilizer enumeration supports 1 ≤ n ≤ 3, got {n}")));
    }
    Ok(CACHE[n - 1].get_or_init(|| bfs_stabilizer_states(n)))
}

/// Families included in a candidate set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateScope {
    /// Every pure t-qubit stabilizer state.
    pub stabilizers: bool,
    /// `C (τ_δ^⊗r ⊗ |0⟩^{t-r}) C†` over the full t-qubit Clifford group (t ≤ 2).
    pub clifford_orbit: bool,
    /// t = 3, r = 1: local Clifford images of `τ_δ` times any 2-qubit stabilizer
    /// state, with `τ_δ` in each of the three positions.
    pub local_product: bool,
}

impl CandidateScope {
    pub const STABILIZERS_ONLY: CandidateScope = CandidateScope {
        stabilizers: true,
        clifford_orbit: false,
        local_product: false,
    };

    /// Default scope for `(t, r)`.
    pub fn default_for(t: usize, r: usize) -> CandidateScope {
        if r == 0 {
            return Self::STABILIZERS_ONLY;
        }
        CandidateScope {
            stabilizers: true,
            clifford_orbit: t <= 2,
            local_product: t == 3 && r == 1,
        }
    }
}

/// One LP column with its preparation.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub state: PreparableState,
    pub vector: PauliVector,
}

/// Builds the deduplicated candidate set for `t` qubits from `τ_δ^⊗r`.
pub fn build_candidates(t: usize, r: usize, delta: f64, scope: CandidateScope) -> Result<Vec<Candidate>> {
    check_rate("delta", delta)?;
    if t == 0 || t > 3 {
        return Err(Error::Capacity(format!("candidate sets support 1 ≤ t ≤ 3, got t = {t}")));
    }
    if r > t {
        return Err(Error::param(format!("r = {r} exceeds t = {t}")));
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |prep: Preparation, vector: PauliVector, out: &mut Vec<Candidate>| {
        if seen.insert(vector.key()) {
            out.push(Candidate {
                state: PreparableState::pure(prep),
                vector,
            });
        }
    };
    if scope.stabilizers {
        for s in enumerate_stabilizer_states(t)? {
            push(s.preparation(), s.vector.clone(), &mut out);
        }
    }
    if scope.clifford_orbit && r > 0 {
        let seed = Preparation::orbit(t, (0..r).collect(), Vec::new());
        let v0 = seed.pauli_vector(delta);
        for c in enumerate_clifford_group(t)? {
            let prep = Preparation::orbit(t, (0..r).collect(), c.gates.clone());
            push(prep, v0.clifford_image(&c.tableau), &mut out);
        }
    }
    if scope.local_product {
        if t != 3 || r != 1 {
            return Err(Error::param("local-product scope is defined for t = 3, r = 1"));
        }
        let tau_v = PauliVector::tau_delta(delta);
        let mut locals: Vec<(&CliffordElement, PauliVector)> = Vec::new();
        let mut local_seen = HashSet::new();
        for c in enumerate_clifford_group(1)? {
            let v = tau_v.clifford_image(&c.tableau);
            if local_seen.insert(v.key()) {
                locals.push((c, v));
            }
        }
        let stabs2 = enumerate_stabilizer_states(2)?;
        for pos in 0..3 {
            let others: Vec<usize> = (0..3).filter(|&q| q != pos).collect();
            for (c, lv) in &locals {
                for s in stabs2 {
                    let mut gates: Vec<CliffordGate> = c.gates.iter().map(|g| g.remap(|_| pos)).collect();
                    gates.extend(s.gates.iter().map(|g| g.remap(|q| others[q])));
                    let prep = Preparation::orbit(3, vec![pos], gates);
                    let vector = place_product(lv, pos, &s.vector, &others);
                    push(prep, vector, &mut out);
                }
            }
        }
    }
    Ok(out)
}

/// Vector of a one-qubit state on `pos` times a two-qubit state on `others`.
fn place_product(single: &PauliVector, pos: usize, pair: &PauliVector, others: &[usize]) -> PauliVector {
    let mut entries = vec![0.0; 64];
    for (a, &va) in single.entries().iter().enumerate() {
        if va == 0.0 {
            continue;
        }
        for (b, &vb) in pair.entries().iter().enumerate() {
            if vb == 0.0 {
                continue;
            }
            let idx = (a << (2 * pos)) | ((b & 3) << (2 * others[0])) | ((b >> 2) << (2 * others[1]));
            entries[idx] = va * vb;
        }
    }
    PauliVector::from_raw(3, entries)
}

/// CSV export: `id,recipe,c0,…` with one row per candidate.
pub fn candidates_csv(candidates: &[Candidate]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let dim = candidates.first().map_or(0, |c| c.vector.entries().len());
    let mut header = vec!["id".to_string(), "recipe".to_string()];
    header.extend((0..dim).map(|i| format!("c{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for (id, c) in candidates.iter().enumerate() {
        let recipe: Vec<String> = c
            .state
            .components()
            .iter()
            .map(|(_, p)| p.recipe_text().trim_end().replace('\n', "; "))
            .collect();
        let mut row = vec![id.to_string(), recipe.join(" | ")];
        row.extend(c.vector.entries().iter().map(|v| format!("{v:.12}")));
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Serde(e.to_string())
}

/// Counts duplicated vectors (for tests and the verify suite).
pub fn count_duplicates(vectors: &[PauliVector]) -> usize {
    let mut counts: HashMap<Vec<i64>, usize> = HashMap::new();
    for v in vectors {
        *counts.entry(v.key()).or_default() += 1;
    }
    counts.values().map(|c| c - 1).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tau_delta_endpoints() {
        assert!((tau().purity() - 1.0).abs() < 1e-12);
        let mixed = tau_delta(1.0).unwrap();
        let mm = DensityMatrix::maximally_mixed(1).unwrap();
        assert!(mixed.operator().max_abs_diff(mm.operator()).unwrap() < 1e-15);
        let b = tau_delta(0.1).unwrap().bloch().unwrap();
        assert!((b[0] - 0.9 * FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((b[1] - 0.9 * FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(b[2].abs() < 1e-15);
        assert!(tau_delta(-0.1).is_err());
    }

    #[test]
    fn tau_matches_t_state() {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        let amps = [h, C64::from_polar(FRAC_1_SQRT_2, std::f64::consts::FRAC_PI_4)];
        let pure = DensityMatrix::from_pure(&amps).unwrap();
        assert!(pure.operator().max_abs_diff(tau().operator()).unwrap() < 1e-15);
    }

    #[test]
    fn stabilizer_counts() {
        assert_eq!(enumerate_stabilizer_states(1).unwrap().len(), 6);
        assert_eq!(enumerate_stabilizer_states(2).unwrap().len(), 60);
        assert!(enumerate_stabilizer_states(4).is_err());
    }

    #[test]
    fn clifford_counts() {
        let g1 = enumerate_clifford_group(1).unwrap();
        assert_eq!(g1.len(), 24);
        assert!(g1[0].gates.is_empty());
        assert_eq!(g1.iter().filter(|c| c.gates.is_empty()).count(), 1);
        assert!(enumerate_clifford_group(3).is_err());
    }

    #[test]
    fn single_qubit_stabilizers_are_octahedron_vertices() {
        for s in enumerate_stabilizer_states(1).unwrap() {
            let e = s.vector.entries();
            let nonzero: Vec<f64> = e[1..].iter().copied().filter(|v| *v != 0.0).collect();
            assert_eq!(nonzero.len(), 1);
            assert_eq!(nonzero[0].abs(), 1.0);
        }
    }

    #[test]
    fn t1_orbit_dedups_to_edge_midpoints() {
        let scope = CandidateScope::default_for(1, 1);
        let cands = build_candidates(1, 1, 0.1, scope).unwrap();
        // 6 stabilizers + 12 distinct images of τ_δ
        assert_eq!(cands.len(), 18);
        assert_eq!(count_duplicates(&cands.iter().map(|c| c.vector.clone()).collect::<Vec<_>>()), 0);
    }

    #[test]
    fn recipes_reproduce_vectors() {
        for (t, r) in [(1, 1), (2, 1)] {
            let cands = build_candidates(t, r, 0.13, CandidateScope::default_for(t, r)).unwrap();
            for c in cands.iter().step_by(7) {
                let dense = PauliVector::from_operator(&c.state.density(0.13).unwrap());
                assert!(dense.max_abs_diff(&c.vector) < 1e-10);
            }
        }
    }

    #[test]
    fn local_product_recipes_reproduce_vectors() {
        let scope = CandidateScope::default_for(3, 1);
        let cands = build_candidates(3, 1, 0.05, scope).unwrap();
        assert_eq!(cands.len(), 1080 + 3 * 12 * 60);
        for c in cands.iter().skip(1080).step_by(97) {
            let dense = PauliVector::from_operator(&c.state.density(0.05).unwrap());
            assert!(dense.max_abs_diff(&c.vector) < 1e-10);
        }
    }

    #[test]
    fn guards() {
        assert!(build_candidates(4, 1, 0.1, CandidateScope::STABILIZERS_ONLY).is_err());
        assert!(build_candidates(2, 3, 0.1, CandidateScope::STABILIZERS_ONLY).is_err());
    }

    #[test]
    fn mixture_validation() {
        let a = Preparation::stabilizer(1, vec![]);
        let b = Preparation::stabilizer(1, vec![CliffordGate::H(0)]);
        assert!(PreparableState::mixture(vec![(0.5, a.clone()), (0.4, b.clone())]).is_err());
        assert!(PreparableState::mixture(vec![(1.5, a.clone()), (-0.5, b.clone())]).is_err());
        let m = PreparableState::mixture(vec![(0.5, a), (0.5, b)]).unwrap();
        let v = m.pauli_vector(0.0);
        assert!((v.get(1) - 0.5).abs() < 1e-15 && (v.get(3) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn statevector_preparation_averages_to_density() {
        let prep = Preparation::orbit(2, vec![1], vec![CliffordGate::H(0), CliffordGate::Cnot(1, 0)]);
        let exact = prep.density(0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut acc = Operator::zeros(2).unwrap();
        let shots = 4000;
        for _ in 0..shots {
            let mut sv = StateVector::zero_state(2).unwrap();
            assert_eq!(prep.prepare_statevector(&mut sv, 0, 0.3, &mut rng).unwrap(), 1);
            acc.add_scaled(&Operator::from_pure(sv.amplitudes()).unwrap(), 1.0 / shots as f64).unwrap();
        }
        assert!(acc.max_abs_diff(&exact).unwrap() < 0.05);
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let cands = build_candidates(1, 0, 0.0, CandidateScope::STABILIZERS_ONLY).unwrap();
        let text = candidates_csv(&cands).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[0].starts_with("id,recipe,c0,c1,c2,c3"));
    }
}
