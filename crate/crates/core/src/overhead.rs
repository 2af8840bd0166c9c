//! Closed-form sampling overheads: noisy-Clifford product formula, bound
//! curves, mitigable regions with 14→2 distillation, assisted/classical ratio.

use serde::{Deserialize, Serialize};

use crate::catalog::{block_decomposition, state_entry, CatalogId};
use crate::error::{check_rate, Error, Result};
use crate::qrom::{qrom_k1_closed_form, qrom_lower_bound};
use crate::states::NoiseModel;

/// Default per-T sampling factor of the best classical simulator.
pub const CLASSICAL_BASELINE: f64 = 1.667;

/// Cliffords per 14→2 distillation round.
pub const DISTILLATION_CLIFFORDS: usize = 130;

fn check_below_one(name: &str, v: f64) -> Result<()> {
    check_rate(name, v)?;
    if v >= 1.0 {
        return Err(Error::param(format!("{name} must be < 1, got {v}")));
    }
    Ok(())
}

/// Per-T one-norm `(2-δ)/((1-δ)(1-δc)²) - 1`.
pub fn t_factor(delta: f64, delta_c: f64) -> Result<f64> {
    check_below_one("delta", delta)?;
    check_below_one("delta_c", delta_c)?;
    Ok((2.0 - delta) / ((1.0 - delta) * (1.0 - delta_c).powi(2)) - 1.0)
}

/// Per-gate one-norm of a noisy one-qubit Clifford.
pub fn clifford1_factor(delta_c: f64) -> Result<f64> {
    check_below_one("delta_c", delta_c)?;
    Ok((1.0 + delta_c / 2.0) / (1.0 - delta_c))
}

/// Per-gate one-norm of a noisy two-qubit Clifford.
pub fn clifford2_factor(delta_c: f64) -> Result<f64> {
    check_below_one("delta_c", delta_c)?;
    Ok((1.0 + 7.0 * delta_c / 8.0) / (1.0 - delta_c))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadQuery {
    pub t: usize,
    pub nc1: usize,
    pub nc2: usize,
    pub noise: NoiseModel,
}

/// `f_T^{2t} f_1^{2n_c1} f_2^{2n_c2}`.
pub fn overhead_total(q: &OverheadQuery) -> Result<f64> {
    Ok(overhead_log(q)?.exp())
}

fn overhead_log(q: &OverheadQuery) -> Result<f64> {
    let ft = t_factor(q.noise.delta, q.noise.delta_c)?;
    let f1 = clifford1_factor(q.noise.delta_c)?;
    let f2 = clifford2_factor(q.noise.delta_c)?;
    Ok(2.0 * (q.t as f64 * ft.ln() + q.nc1 as f64 * f1.ln() + q.nc2 as f64 * f2.ln()))
}

/// Error rates and T-count multipliers of `m` rounds of 14→2 distillation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistillationSchedule {
    pub rounds: usize,
    /// `δ_ℓ` for `ℓ = 0..=m`.
    pub deltas: Vec<f64>,
}

impl DistillationSchedule {
    pub fn new(delta0: f64, rounds: usize) -> Result<Self> {
        check_rate("delta", delta0)?;
        let mut deltas = vec![delta0];
        for _ in 0..rounds {
            let d = *deltas.last().expect("non-empty");
            deltas.push(7.0 * d * d);
        }
        Ok(DistillationSchedule { rounds, deltas })
    }

    pub fn final_delta(&self) -> f64 {
        *self.deltas.last().expect("non-empty")
    }

    /// `t^(ℓ) = 7^ℓ t` for `ℓ = 0..=m`.
    pub fn t_costs(&self, t: usize) -> Vec<u128> {
        (0..=self.rounds).map(|l| 7u128.pow(l as u32) * t as u128).collect()
    }

    /// `Σ_{ℓ=1}^m t^(ℓ)`.
    pub fn distilled_t_total(&self, t: usize) -> u128 {
        self.t_costs(t).iter().skip(1).sum()
    }
}

/// Overhead with distillation-stage Cliffords counted at rate `δ_cd`.
pub fn distillation_mitigation_overhead(
    t: usize,
    nc: usize,
    delta0: f64,
    delta_c: f64,
    delta_cd: f64,
    rounds: usize,
) -> Result<f64> {
    Ok(distillation_log(t, nc, delta0, delta_c, delta_cd, rounds, DISTILLATION_CLIFFORDS)?.exp())
}

fn distillation_log(
    t: usize,
    nc: usize,
    delta0: f64,
    delta_c: f64,
    delta_cd: f64,
    rounds: usize,
    per_round: usize,
) -> Result<f64> {
    let schedule = DistillationSchedule::new(delta0, rounds)?;
    let q = OverheadQuery {
        t,
        nc1: 0,
        nc2: nc,
        noise: NoiseModel::new(schedule.final_delta(), delta_c, delta_cd)?,
    };
    let extra = 2.0 * per_round as f64 * schedule.distilled_t_total(t) as f64 * clifford2_factor(delta_cd)?.ln();
    Ok(overhead_log(&q)? + extra)
}

/// One boundary point: for `t` T gates, up to `nc_max` two-qubit Cliffords fit
/// the budget (`None` when Cliffords are noiseless and unbounded).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub t: usize,
    pub nc_max: Option<u64>,
    pub rounds: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionQuery {
    pub budget: f64,
    pub delta0: f64,
    pub delta_c: f64,
    pub delta_cd: f64,
    pub rounds: usize,
    pub cliffords_per_round: usize,
}

impl RegionQuery {
    pub fn new(budget: f64, delta0: f64, delta_c: f64, rounds: usize) -> Self {
        RegionQuery {
            budget,
            delta0,
            delta_c,
            delta_cd: 0.0,
            rounds,
            cliffords_per_round: DISTILLATION_CLIFFORDS,
        }
    }
}

const TIE: f64 = 1e-12;

/// Largest `t` with overhead ≤ budget at `n_c = 0`.
pub fn t_max(q: &RegionQuery) -> Result<Option<usize>> {
    let log_budget = q.budget.ln();
    if !(q.budget > 1.0) {
        return Ok(None);
    }
    let per_t = distillation_log(1, 0, q.delta0, q.delta_c, q.delta_cd, q.rounds, q.cliffords_per_round)?;
    if per_t <= 0.0 {
        return Err(Error::param("per-T overhead is 1; the region is unbounded"));
    }
    let mut t = ((log_budget / per_t) * (1.0 + TIE)).floor() as usize;
    while t > 0 && per_t * t as f64 > log_budget * (1.0 + TIE) {
        t -= 1;
    }
    Ok(Some(t))
}

/// Boundary of the region with overhead ≤ budget; every Clifford counted as two-qubit.
pub fn mitigable_region(q: &RegionQuery) -> Result<Vec<RegionPoint>> {
    check_below_one("delta_c", q.delta_c)?;
    check_below_one("delta_cd", q.delta_cd)?;
    let Some(tmax) = t_max(q)? else {
        return Ok(Vec::new());
    };
    let log_budget = q.budget.ln();
    let per_t = distillation_log(1, 0, q.delta0, q.delta_c, q.delta_cd, q.rounds, q.cliffords_per_round)?;
    let per_c = 2.0 * clifford2_factor(q.delta_c)?.ln();
    let mut out = Vec::with_capacity(tmax + 1);
    for t in 0..=tmax {
        let left = log_budget - per_t * t as f64;
        let nc_max = if per_c == 0.0 {
            None
        } else {
            let raw = (left / per_c) * (1.0 + TIE) + TIE;
            Some(raw.floor().max(0.0) as u64)
        };
        out.push(RegionPoint {
            t,
            nc_max,
            rounds: q.rounds,
        });
    }
    Ok(out)
}

/// `‖q_blocks‖² / baseline^t`: quantum-assisted over classical sample counts.
pub fn assisted_vs_classical_ratio(t: usize, k: usize, delta: f64, baseline: f64) -> Result<f64> {
    if !(2..=3).contains(&k) {
        return Err(Error::param(format!("ratio k = t/r must be 2 or 3, got {k}")));
    }
    if !(baseline > 0.0) {
        return Err(Error::param("classical baseline must be positive"));
    }
    if t == 0 {
        return Ok(1.0);
    }
    let blocks = block_decomposition(t, CatalogId::for_ratio(k)?, delta)?;
    Ok(blocks.one_norm().powi(2) / baseline.powi(t as i32))
}

/// One row of the per-T bound curves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub delta: f64,
    pub k1: f64,
    pub t2r2: f64,
    pub t3r3: f64,
    pub lower: f64,
}

/// `k`-th roots of the catalog one-norms and of the dyadic lower bound.
pub fn bound_curves(grid: &[f64]) -> Result<Vec<BoundRow>> {
    grid.iter()
        .map(|&delta| {
            if !(0.0..=0.5).contains(&delta) {
                return Err(Error::param(format!("bound curves are tabulated on δ ∈ [0, 0.5], got {delta}")));
            }
            Ok(BoundRow {
                delta,
                k1: qrom_k1_closed_form(delta),
                t2r2: state_entry(CatalogId::T2r2, delta)?.one_norm().sqrt(),
                t3r3: state_entry(CatalogId::T3r3, delta)?.one_norm().cbrt(),
                lower: qrom_lower_bound(1, 1, delta)?,
            })
        })
        .collect()
}

/// CSV with header `delta,k1,t2r2,t3r3,lower`.
pub fn bound_curves_csv(rows: &[BoundRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Serde(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
}

/// CSV with header `t,nc_max,rounds` (`inf` for an unbounded `nc_max`).
pub fn region_csv(points: &[RegionPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "nc_max", "rounds"]).map_err(|e| Error::Serde(e.to_string()))?;
    for p in points {
        let nc = p.nc_max.map_or_else(|| "inf".to_string(), |n| n.to_string());
        w.write_record([p.t.to_string(), nc, p.rounds.to_string()])
            .map_err(|e| Error::Serde(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::DELTA_TH;

    fn query(t: usize, nc1: usize, nc2: usize, delta: f64, delta_c: f64) -> OverheadQuery {
        OverheadQuery {
            t,
            nc1,
            nc2,
            noise: NoiseModel::new(delta, delta_c, 0.0).unwrap(),
        }
    }

    #[test]
    fn gate_factors() {
        assert!((overhead_total(&query(1, 0, 0, 0.01, 0.001)).unwrap() - 1.0284541).abs() < 1e-6);
        assert!((clifford1_factor(0.001).unwrap().powi(2) - 1.00301).abs() < 1e-5);
        assert!((clifford2_factor(0.001).unwrap().powi(2) - 1.00376).abs() < 1e-5);
        let v = overhead_total(&query(7, 0, 0, 0.1, 0.0)).unwrap();
        assert!((v - 0.9f64.powi(-14)).abs() < 1e-9);
    }

    #[test]
    fn schedule() {
        let s = DistillationSchedule::new(0.05, 2).unwrap();
        assert!((s.final_delta() - 0.00214375).abs() < 1e-15);
        assert_eq!(s.distilled_t_total(1), 56);
        let fixed = DistillationSchedule::new(1.0 / 7.0, 3).unwrap();
        assert!((fixed.final_delta() - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn region_boundaries() {
        let t0 = t_max(&RegionQuery::new(100.0, 0.05, 1e-5, 0)).unwrap().unwrap();
        assert_eq!(t0, 44);
        let t2 = t_max(&RegionQuery::new(100.0, 0.05, 1e-5, 2)).unwrap().unwrap();
        assert_eq!(t2, 1053);
        assert!(mitigable_region(&RegionQuery::new(1.0, 0.05, 1e-5, 0)).unwrap().is_empty());
        let pts = mitigable_region(&RegionQuery::new(100.0, 0.05, 1e-5, 0)).unwrap();
        for p in &pts {
            let nc = p.nc_max.unwrap() as usize;
            let inside = distillation_mitigation_overhead(p.t, nc, 0.05, 1e-5, 0.0, 0).unwrap();
            let outside = distillation_mitigation_overhead(p.t, nc + 1, 0.05, 1e-5, 0.0, 0).unwrap();
            assert!(inside <= 100.0 * (1.0 + 1e-9) && outside > 100.0);
        }
        let noiseless = mitigable_region(&RegionQuery::new(100.0, 0.05, 0.0, 0)).unwrap();
        assert!(noiseless.iter().all(|p| p.nc_max.is_none()));
    }

    #[test]
    fn distillation_cliffords_shrink_region() {
        let mut q = RegionQuery::new(100.0, 0.05, 1e-5, 2);
        let base = t_max(&q).unwrap().unwrap();
        q.delta_cd = 1e-5;
        let noisy = t_max(&q).unwrap().unwrap();
        assert!(noisy < base);
        let direct = distillation_mitigation_overhead(10, 3, 0.05, 1e-5, 0.0, 2).unwrap();
        let plain = overhead_total(&OverheadQuery {
            t: 10,
            nc1: 0,
            nc2: 3,
            noise: NoiseModel::new(0.00214375, 1e-5, 0.0).unwrap(),
        })
        .unwrap();
        assert!((direct - plain).abs() < 1e-12 * plain);
    }

    #[test]
    fn ratio_values() {
        let r = assisted_vs_classical_ratio(30, 3, 0.01, CLASSICAL_BASELINE).unwrap();
        assert!((r - (1.45715f64 / 1.667).powi(30)).abs() < 1e-3);
        assert_eq!(assisted_vs_classical_ratio(0, 2, 0.1, CLASSICAL_BASELINE).unwrap(), 1.0);
        assert!(assisted_vs_classical_ratio(3, 4, 0.1, CLASSICAL_BASELINE).is_err());
    }

    #[test]
    fn curves() {
        let rows = bound_curves(&[0.0, 0.1, DELTA_TH]).unwrap();
        assert!((rows[0].k1 - 1.0).abs() < 1e-12 && (rows[0].t3r3 - 1.0).abs() < 1e-12);
        assert!((rows[1].lower - 1.0 / 0.95).abs() < 1e-12);
        assert!((rows[2].k1 - std::f64::consts::SQRT_2).abs() < 1e-12);
        let csv = bound_curves_csv(&rows).unwrap();
        assert!(csv.starts_with("delta,k1,t2r2,t3r3,lower\n"));
    }
}
