//! Robustness of magic and its quantum-assisted variant as ℓ1-minimal
//! quasiprobability decompositions, plus monotone-based lower bounds.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dense::Operator;
use crate::error::{check_rate, Error, Result};
use crate::lp::{self, LinearProgram};
use crate::states::{build_candidates, CandidateScope, PauliVector, PreparableState, Preparation, DELTA_TH};

/// Weights below this magnitude are dropped from reported decompositions.
pub const WEIGHT_CUTOFF: f64 = 1e-10;

/// One signed term `q_x η_x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub weight: f64,
    pub state: PreparableState,
}

/// Signed decomposition of `τ^⊗t` over states preparable from `τ_δ^⊗r`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasiDecomposition {
    pub t: usize,
    pub r: usize,
    pub delta: f64,
    terms: Vec<Term>,
    one_norm: f64,
}

impl QuasiDecomposition {
    pub fn new(t: usize, r: usize, delta: f64, terms: Vec<Term>) -> Result<Self> {
        check_rate("delta", delta)?;
        if terms.is_empty() {
            return Err(Error::param("decomposition has no terms"));
        }
        for term in &terms {
            if term.state.num_qubits() != t {
                return Err(Error::DimensionMismatch {
                    expected: t,
                    found: term.state.num_qubits(),
                });
            }
            if !term.weight.is_finite() {
                return Err(Error::Numerical("non-finite quasiprobability weight".into()));
            }
        }
        let one_norm = terms.iter().map(|t| t.weight.abs()).sum();
        Ok(QuasiDecomposition {
            t,
            r,
            delta,
            terms,
            one_norm,
        })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn one_norm(&self) -> f64 {
        self.one_norm
    }

    pub fn weight_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    /// Largest number of noisy magic states one sample consumes.
    pub fn magic_count(&self) -> usize {
        self.terms.iter().map(|t| t.state.magic_count()).max().unwrap_or(0)
    }

    pub fn is_stabilizer(&self) -> bool {
        self.terms.iter().all(|t| t.state.is_stabilizer())
    }

    /// `Σ q_x v(η_x)`.
    pub fn reconstruct(&self) -> PauliVector {
        let mut acc = vec![0.0; 1usize << (2 * self.t)];
        for term in &self.terms {
            for (a, v) in acc.iter_mut().zip(term.state.pauli_vector(self.delta).entries()) {
                *a += term.weight * v;
            }
        }
        PauliVector::from_raw(self.t, acc)
    }

    /// `Σ q_x η_x` on the dense oracle.
    pub fn reconstruct_dense(&self) -> Result<Operator> {
        let mut acc = Operator::zeros(self.t)?;
        for term in &self.terms {
            acc.add_scaled(&term.state.density(self.delta)?, term.weight)?;
        }
        Ok(acc)
    }

    /// Max-norm distance of the reconstruction from `τ^⊗t` in Pauli coordinates.
    pub fn reconstruction_error(&self) -> f64 {
        self.reconstruct().max_abs_diff(&tau_power_vector(self.t))
    }

    /// Samples a term with probability `|q_x| / ‖q‖₁`; returns (index, sign).
    pub fn sample_term<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let u = rng.gen::<f64>() * self.one_norm;
        let mut acc = 0.0;
        for (i, term) in self.terms.iter().enumerate() {
            acc += term.weight.abs();
            if u < acc {
                return (i, term.weight.signum());
            }
        }
        let last = self.terms.len() - 1;
        (last, self.terms[last].weight.signum())
    }

    /// Copy with `eps` added to the first weight, so `Σ q ≠ 1` (negative control).
    pub fn perturbed(&self, eps: f64) -> QuasiDecomposition {
        let mut d = self.clone();
        d.terms[0].weight += eps;
        d.one_norm = d.terms.iter().map(|t| t.weight.abs()).sum();
        d
    }
}

/// `v(τ)^⊗t`.
pub fn tau_power_vector(t: usize) -> PauliVector {
    let tau = PauliVector::tau_delta(0.0);
    let mut v = PauliVector::from_raw(0, vec![1.0]);
    for _ in 0..t {
        v = v.tensor(&tau);
    }
    v
}

/// Optimum of the ℓ1 program.
#[derive(Clone, Debug)]
pub struct L1Solution {
    pub value: f64,
    /// `(candidate index, weight)` for every |weight| > [`WEIGHT_CUTOFF`].
    pub weights: Vec<(usize, f64)>,
    pub duality_gap: f64,
    pub iterations: usize,
    /// Optimal simplex basis, reusable as a warm-start hint.
    pub basis: Vec<usize>,
}

/// Rows where neither the target nor any column has support are dropped.
fn active_rows(target: &PauliVector, columns: &[PauliVector]) -> Result<Vec<usize>> {
    let dim = target.entries().len();
    for c in columns {
        if c.entries().len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: c.entries().len(),
            });
        }
    }
    Ok((0..dim)
        .filter(|&i| target.get(i) != 0.0 || columns.iter().any(|c| c.get(i) != 0.0))
        .collect())
}

/// Split-variable program: columns `[A, -A]`, costs `(c_plus, c_minus)`.
fn split_program(target: &PauliVector, columns: &[PauliVector], c_plus: f64, c_minus: f64) -> Result<LinearProgram> {
    let rows = active_rows(target, columns)?;
    let mut cols = Vec::with_capacity(2 * columns.len());
    for c in columns {
        cols.push(rows.iter().map(|&i| c.get(i)).collect::<Vec<f64>>());
    }
    for c in columns {
        cols.push(rows.iter().map(|&i| -c.get(i)).collect::<Vec<f64>>());
    }
    let mut cost = vec![c_plus; columns.len()];
    cost.extend(std::iter::repeat_n(c_minus, columns.len()));
    LinearProgram::new(&cols, rows.iter().map(|&i| target.get(i)).collect(), cost)
}

/// `min Σ|x|` subject to `Σ x_j column_j = target`.
pub fn min_l1_decompose(target: &PauliVector, columns: &[PauliVector]) -> Result<L1Solution> {
    min_l1_decompose_warm(target, columns, &[])
}

/// [`min_l1_decompose`] warm-started from a basis of an earlier solve over
/// the same candidate layout.
pub fn min_l1_decompose_warm(target: &PauliVector, columns: &[PauliVector], hint: &[usize]) -> Result<L1Solution> {
    if columns.is_empty() {
        return Err(Error::Infeasible("empty candidate set".into()));
    }
    let prog = split_program(target, columns, 1.0, 1.0)?;
    let sol = lp::solve_warm(&prog, hint)?;
    let n = columns.len();
    let weights = (0..n)
        .map(|j| (j, sol.x[j] - sol.x[n + j]))
        .filter(|(_, w)| w.abs() > WEIGHT_CUTOFF)
        .collect();
    Ok(L1Solution {
        value: sol.objective,
        weights,
        duality_gap: sol.duality_gap,
        iterations: sol.iterations,
        basis: sol.basis,
    })
}

/// Relative robustness `s`: the least negative mass in an affine decomposition,
/// solved directly (cost on the negative part only).
pub fn relative_robustness(target: &PauliVector, columns: &[PauliVector]) -> Result<f64> {
    if columns.is_empty() {
        return Err(Error::Infeasible("empty candidate set".into()));
    }
    let prog = split_program(target, columns, 0.0, 1.0)?;
    Ok(lp::solve(&prog)?.objective)
}

/// Membership in the convex hull of the columns.
pub fn in_hull(target: &PauliVector, columns: &[PauliVector]) -> Result<bool> {
    let rows = active_rows(target, columns)?;
    let cols: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| rows.iter().map(|&i| c.get(i)).collect())
        .collect();
    let b: Vec<f64> = rows.iter().map(|&i| target.get(i)).collect();
    lp::is_feasible(&cols, &b)
}

/// Value, robustness and an optimal decomposition.
#[derive(Clone, Debug)]
pub struct QromResult {
    pub t: usize,
    pub r: usize,
    pub delta: f64,
    pub value: f64,
    pub robustness: f64,
    pub duality_gap: f64,
    pub num_candidates: usize,
    pub decomposition: QuasiDecomposition,
}

/// `ℛ(τ^⊗t | τ_δ^⊗r)` over the candidate families in `scope`.
pub fn qrom(t: usize, r: usize, delta: f64, scope: CandidateScope) -> Result<QromResult> {
    Ok(qrom_warm(t, r, delta, scope, &[])?.0)
}

/// [`qrom`] warm-started from `hint`; also returns the optimal basis.
pub fn qrom_warm(t: usize, r: usize, delta: f64, scope: CandidateScope, hint: &[usize]) -> Result<(QromResult, Vec<usize>)> {
    let candidates = build_candidates(t, r, delta, scope)?;
    let columns: Vec<PauliVector> = candidates.iter().map(|c| c.vector.clone()).collect();
    let sol = min_l1_decompose_warm(&tau_power_vector(t), &columns, hint)?;
    let terms = sol
        .weights
        .iter()
        .map(|&(j, w)| Term {
            weight: w,
            state: candidates[j].state.clone(),
        })
        .collect();
    let decomposition = QuasiDecomposition::new(t, r, delta, terms)?;
    let result = QromResult {
        t,
        r,
        delta,
        value: sol.value,
        robustness: (sol.value - 1.0) / 2.0,
        duality_gap: sol.duality_gap,
        num_candidates: columns.len(),
        decomposition,
    };
    Ok((result, sol.basis))
}

/// Closed-form single-copy value: `1/(1-δ)` up to the threshold, `√2` above.
pub fn qrom_k1_closed_form(delta: f64) -> f64 {
    if delta <= DELTA_TH {
        1.0 / (1.0 - delta)
    } else {
        SQRT_2
    }
}

/// `Λ(τ) = 2(2-√2)`.
pub const DYADIC_TAU: f64 = 2.0 * (2.0 - SQRT_2);

/// Dyadic negativity of `τ_δ`.
pub fn dyadic_negativity_tau_delta(delta: f64) -> Result<f64> {
    check_rate("delta", delta)?;
    Ok(if delta <= DELTA_TH {
        DYADIC_TAU * (1.0 - delta / 2.0)
    } else {
        1.0
    })
}

/// Weights `(q₁, q₂)` of `τ_δ = q₁(|+⟩⟨+| + |i⟩⟨i|) + q₂|+⟩⟨i| + q₂*|i⟩⟨+|`.
pub fn dyadic_weights(delta: f64) -> Result<(f64, C64)> {
    check_rate("delta", delta)?;
    let q1 = 1.0 - FRAC_1_SQRT_2 + delta * FRAC_1_SQRT_2;
    let q2 = C64::new(0.5, 0.5) * (-SQRT_2 * delta + SQRT_2 - 1.0);
    Ok((q1, q2))
}

/// `Λ(τ)^t / Λ(τ_δ)^r`.
pub fn qrom_lower_bound(t: usize, r: usize, delta: f64) -> Result<f64> {
    if r > t {
        return Err(Error::param(format!("r = {r} exceeds t = {t}")));
    }
    Ok(DYADIC_TAU.powi(t as i32) / dyadic_negativity_tau_delta(delta)?.powi(r as i32))
}

/// JSON view of one mixture component.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentJson {
    pub probability: f64,
    pub resource: Vec<usize>,
    pub circuit: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecipeJson {
    pub qubits: usize,
    pub mixture: Vec<ComponentJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermJson {
    pub weight: f64,
    pub recipe: RecipeJson,
}

/// Serialized decomposition: `{t, r, delta, value, robustness, terms}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionJson {
    pub t: usize,
    pub r: usize,
    pub delta: f64,
    pub value: f64,
    pub robustness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duality_gap: Option<f64>,
    pub terms: Vec<TermJson>,
}

impl DecompositionJson {
    pub fn from_decomposition(d: &QuasiDecomposition, value: f64, duality_gap: Option<f64>) -> Self {
        let terms = d
            .terms()
            .iter()
            .map(|term| TermJson {
                weight: term.weight,
                recipe: RecipeJson {
                    qubits: term.state.num_qubits(),
                    mixture: term
                        .state
                        .components()
                        .iter()
                        .map(|(p, prep)| ComponentJson {
                            probability: *p,
                            resource: prep.resource.clone(),
                            circuit: prep.gates.iter().map(|g| g.to_string()).collect::<Vec<_>>().join("\n"),
                        })
                        .collect(),
                },
            })
            .collect();
        DecompositionJson {
            t: d.t,
            r: d.r,
            delta: d.delta,
            value,
            robustness: (value - 1.0) / 2.0,
            duality_gap,
            terms,
        }
    }

    pub fn from_result(res: &QromResult) -> Self {
        Self::from_decomposition(&res.decomposition, res.value, Some(res.duality_gap))
    }

    /// Rebuilds the decomposition; recipe circuits use the gate-line syntax.
    pub fn to_decomposition(&self) -> Result<QuasiDecomposition> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let mut comps = Vec::with_capacity(term.recipe.mixture.len());
            for c in &term.recipe.mixture {
                let gates = crate::io::parse_gate_list(&c.circuit)?;
                let prep = Preparation::orbit(term.recipe.qubits, c.resource.clone(), gates);
                prep.validate()?;
                comps.push((c.probability, prep));
            }
            let state = PreparableState::mixture(comps)?;
            terms.push(Term {
                weight: term.weight,
                state,
            });
        }
        QuasiDecomposition::new(self.t, self.r, self.delta, terms)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DensityMatrix;
    use crate::states::{enumerate_stabilizer_states, tau_delta};

    fn stab_columns(n: usize) -> Vec<PauliVector> {
        enumerate_stabilizer_states(n).unwrap().iter().map(|s| s.vector.clone()).collect()
    }

    #[test]
    fn rom_of_tau_is_sqrt2() {
        let sol = min_l1_decompose(&tau_power_vector(1), &stab_columns(1)).unwrap();
        assert!((sol.value - SQRT_2).abs() < 1e-9);
        assert!(sol.duality_gap < 1e-9);
    }

    #[test]
    fn stabilizer_target_has_unit_value() {
        let cols = stab_columns(2);
        let sol = min_l1_decompose(&cols[17], &cols).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-9);
        assert!(relative_robustness(&cols[17], &cols).unwrap().abs() < 1e-9);
    }

    #[test]
    fn robustness_of_tau() {
        let s = relative_robustness(&tau_power_vector(1), &stab_columns(1)).unwrap();
        assert!((s - (SQRT_2 - 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn k1_values() {
        let res = qrom(1, 1, 0.2, CandidateScope::default_for(1, 1)).unwrap();
        assert!((res.value - 1.25).abs() < 1e-9);
        assert!(res.decomposition.reconstruction_error() < 1e-9);
        let res = qrom(1, 1, 0.4, CandidateScope::default_for(1, 1)).unwrap();
        assert!((res.value - SQRT_2).abs() < 1e-9);
        let res = qrom(1, 1, 0.1, CandidateScope::default_for(1, 1)).unwrap();
        assert!((res.robustness - (1.0 / 0.9 - 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_target_reported() {
        // only |0⟩ available: τ is outside its span
        let cols = vec![PauliVector::zero_state(1)];
        assert!(matches!(
            min_l1_decompose(&tau_power_vector(1), &cols),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn hull_membership_at_threshold() {
        let cols = stab_columns(1);
        assert!(in_hull(&PauliVector::tau_delta(DELTA_TH + 1e-6), &cols).unwrap());
        assert!(!in_hull(&PauliVector::tau_delta(0.2), &cols).unwrap());
    }

    #[test]
    fn dyadic_values() {
        assert!((dyadic_negativity_tau_delta(0.0).unwrap() - 1.1715728753).abs() < 1e-9);
        assert!((DYADIC_TAU * (1.0 - DELTA_TH / 2.0) - 1.0).abs() < 1e-12);
        assert_eq!(dyadic_negativity_tau_delta(0.5).unwrap(), 1.0);
        for delta in [0.0, 0.1, 0.2, DELTA_TH] {
            let (q1, q2) = dyadic_weights(delta).unwrap();
            let lam = dyadic_negativity_tau_delta(delta).unwrap();
            assert!((2.0 * q1 + 2.0 * q2.norm() - lam).abs() < 1e-12);
        }
    }

    #[test]
    fn dyadic_decomposition_reconstructs() {
        let delta = 0.1;
        let (q1, q2) = dyadic_weights(delta).unwrap();
        let h = FRAC_1_SQRT_2;
        let plus = [C64::new(h, 0.0), C64::new(h, 0.0)];
        let plus_i = [C64::new(h, 0.0), C64::new(0.0, h)];
        let outer = |a: &[C64; 2], b: &[C64; 2]| -> Operator {
            let mut o = Operator::zeros(1).unwrap();
            for r in 0..2 {
                for c in 0..2 {
                    o.set(r, c, a[r] * b[c].conj());
                }
            }
            o
        };
        let mut acc = Operator::zeros(1).unwrap();
        for (w, a, b) in [(C64::new(q1, 0.0), &plus, &plus), (C64::new(q1, 0.0), &plus_i, &plus_i), (q2, &plus, &plus_i), (q2.conj(), &plus_i, &plus)] {
            let o = outer(a, b);
            for r in 0..2 {
                for c in 0..2 {
                    acc.set(r, c, acc.get(r, c) + w * o.get(r, c));
                }
            }
        }
        let target: DensityMatrix = tau_delta(delta).unwrap();
        assert!(acc.max_abs_diff(target.operator()).unwrap() < 1e-12);
    }

    #[test]
    fn lower_bound_branches() {
        assert!((qrom_lower_bound(1, 1, 0.1).unwrap() - 1.0 / 0.95).abs() < 1e-12);
        assert!((qrom_lower_bound(1, 1, 0.5).unwrap() - DYADIC_TAU).abs() < 1e-12);
        assert!((qrom_lower_bound(3, 3, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(qrom_lower_bound(1, 2, 0.1).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let res = qrom(1, 1, 0.2, CandidateScope::default_for(1, 1)).unwrap();
        let json = DecompositionJson::from_result(&res).to_json_string().unwrap();
        let back = DecompositionJson::from_json_str(&json).unwrap().to_decomposition().unwrap();
        assert!((back.one_norm() - 1.25).abs() < 1e-12);
        assert!(back.reconstruction_error() < 1e-9);
    }
}
