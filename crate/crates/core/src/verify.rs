//! Self-check suite behind the `verify` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::catalog::{
    catalog_channel_clifford, catalog_channel_t, channel_reconstruction_error, channel_terms_cptp, state_entry,
    CatalogId,
};
use crate::circuit::{gadgetize, random_circuit};
use crate::config::Config;
use crate::dense::Operator;
use crate::error::Result;
use crate::mitigation::{MitigationPlan, Sampling};
use crate::overhead::{bound_curves, clifford1_factor, clifford2_factor, t_factor, DistillationSchedule};
use crate::qrom::{qrom, qrom_k1_closed_form, relative_robustness, tau_power_vector};
use crate::sim::{exact_output_state, ideal_expectation, MagicInput};
use crate::states::{build_candidates, tau, CandidateScope, PreparableState, Preparation, DELTA_TH};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check {
            name: name.to_string(),
            passed,
            detail,
        },
        Err(e) => Check {
            name: name.to_string(),
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Random circuit whose ideal expectation is not close to zero.
fn informative_circuit(rng: &mut ChaCha8Rng, n: usize, t: usize, gates: usize) -> Result<crate::circuit::Circuit> {
    for _ in 0..10_000 {
        let c = random_circuit(n, t, gates, rng);
        if ideal_expectation(&c)?.abs() > 0.1 {
            return Ok(c);
        }
    }
    Err(crate::error::Error::Numerical("no random circuit with |⟨P⟩| > 0.1".into()))
}

fn grid(n: usize, hi: f64) -> Vec<f64> {
    (0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect()
}

/// Runs every invariant check.
pub fn run_suite(config: &Config) -> Vec<Check> {
    let tol = config.reconstruction_tolerance;
    vec![
        check("single-copy LP matches the closed form", || {
            let mut worst = 0.0f64;
            for delta in [0.0, 0.1, 0.2, DELTA_TH, 0.4, 0.5] {
                let v = qrom(1, 1, delta, CandidateScope::default_for(1, 1))?.value;
                worst = worst.max((v - qrom_k1_closed_form(delta)).abs());
            }
            Ok((worst < 1e-6, format!("max deviation {worst:.2e}")))
        }),
        check("QRoM = 1 + 2 R", || {
            let mut worst = 0.0f64;
            for delta in [0.05, 0.15, 0.25] {
                let res = qrom(2, 1, delta, CandidateScope::default_for(2, 1))?;
                let cols: Vec<_> = build_candidates(2, 1, delta, CandidateScope::default_for(2, 1))?
                    .into_iter()
                    .map(|c| c.vector)
                    .collect();
                let r = relative_robustness(&tau_power_vector(2), &cols)?;
                worst = worst.max((res.value - 1.0 - 2.0 * r).abs());
            }
            Ok((worst < 1e-7, format!("max deviation {worst:.2e}")))
        }),
        check("LP duality gap", || {
            let res = qrom(2, 2, 0.1, CandidateScope::default_for(2, 2))?;
            Ok((res.duality_gap <= config.lp_gap_tolerance, format!("gap {:.2e}", res.duality_gap)))
        }),
        check("catalog state entries reconstruct τ^⊗k", || {
            let mut worst = 0.0f64;
            let mut sum_err = 0.0f64;
            for id in CatalogId::STATES {
                for delta in grid(5, DELTA_TH) {
                    let d = state_entry(id, delta)?;
                    worst = worst.max(d.reconstruction_error());
                    sum_err = sum_err.max((d.weight_sum() - 1.0).abs());
                }
            }
            Ok((worst < tol && sum_err < 1e-12, format!("reconstruction {worst:.2e}, Σq {sum_err:.2e}")))
        }),
        check("channel decompositions match their Choi targets", || {
            let mut worst = 0.0f64;
            let mut cptp = true;
            for (delta, delta_c) in [(0.0, 0.0), (0.1, 0.01), (0.25, 0.05)] {
                for d in [
                    catalog_channel_t(delta, delta_c)?,
                    catalog_channel_clifford(1, delta_c)?,
                    catalog_channel_clifford(2, delta_c)?,
                ] {
                    worst = worst.max(channel_reconstruction_error(&d)?);
                    cptp &= channel_terms_cptp(&d)?;
                }
            }
            Ok((worst < tol && cptp, format!("max Choi deviation {worst:.2e}, terms CPTP: {cptp}")))
        }),
        check("gadget with |T⟩ reproduces the T gate", || {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut worst = 0.0f64;
            for _ in 0..10 {
                let c = random_circuit(2, 2, 6, &mut rng);
                let ideal = exact_output_state(&c, &MagicInput::Zero)?;
                let g = gadgetize(&c);
                let magic = MagicInput::density(tau().tensor(&tau())?);
                let out = exact_output_state(&g, &magic)?;
                worst = worst.max(out.max_abs_diff(&ideal)?);
            }
            Ok((worst < 1e-10, format!("max deviation {worst:.2e}")))
        }),
        check("estimators are unbiased", || {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
            let s = Sampling::new(0.05, 0.05, 0);
            let mut worst = 0.0f64;
            for id in [CatalogId::K1, CatalogId::T2r1, CatalogId::T2r2, CatalogId::T3r3] {
                let c = informative_circuit(&mut rng, 2, 3, 6)?;
                let delta = rng.gen_range(0.0..DELTA_TH);
                let plan = MitigationPlan::from_catalog(&c, id, delta, &s)?;
                worst = worst.max((plan.exact_mean()? - ideal_expectation(&c)?).abs());
            }
            let c = informative_circuit(&mut rng, 2, 2, 5)?;
            let noise = crate::states::NoiseModel::new(0.1, 0.01, 0.0)?;
            let plan = MitigationPlan::channels(&c, noise, &s)?;
            worst = worst.max((plan.exact_mean()? - ideal_expectation(&c)?).abs());
            Ok((worst < 1e-10, format!("max deviation {worst:.2e}")))
        }),
        check("noisy gate overhead factors", || {
            let ft = t_factor(0.01, 0.001)?.powi(2);
            let f1 = clifford1_factor(0.001)?.powi(2);
            let f2 = clifford2_factor(0.001)?.powi(2);
            let ok = (ft - 1.02845).abs() < 1e-5 && (f1 - 1.00301).abs() < 1e-5 && (f2 - 1.00376).abs() < 1e-5;
            Ok((ok, format!("{ft:.6} / {f1:.6} / {f2:.6}")))
        }),
        check("bound curve ordering", || {
            let rows = bound_curves(&grid(12, DELTA_TH)[1..11])?;
            let ok = rows
                .iter()
                .all(|r| r.lower <= r.t3r3 + 1e-12 && r.t3r3 <= r.t2r2 + 1e-12 && r.t2r2 <= r.k1 + 1e-12);
            Ok((ok, format!("{} grid points", rows.len())))
        }),
        check("distillation schedule", || {
            let d2 = DistillationSchedule::new(0.05, 2)?.final_delta();
            Ok(((d2 - 0.00214375).abs() < 1e-15, format!("δ_2 = {d2}")))
        }),
        check("noisy state densities are valid", || {
            let mut ok = true;
            for delta in grid(4, 0.5) {
                let st = PreparableState::pure(Preparation::orbit(1, vec![0], vec![]));
                let rho = st.density(delta)?;
                ok &= rho.hermitian_eigenvalues()[0] > -1e-12;
                ok &= (rho.trace().re - 1.0).abs() < 1e-12;
                ok &= rho.max_abs_diff(&Operator::zeros(1)?)? > 0.0;
            }
            Ok((ok, "τ_δ is a state on the grid".into()))
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let checks = run_suite(&Config::default());
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
