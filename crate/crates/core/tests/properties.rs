//! Invariants of the LP, the catalog, the simulators and the estimators.

use std::collections::HashSet;
use std::f64::consts::SQRT_2;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use magus::catalog::{block_decomposition, state_entry, CatalogId};
use magus::circuit::{gadgetize, random_circuit, CliffordGate};
use magus::io::parse_circuit;
use magus::mitigation::{MitigationPlan, Sampling};
use magus::overhead::{
    clifford1_factor, clifford2_factor, mitigable_region, overhead_total, t_factor, DistillationSchedule,
    OverheadQuery, RegionQuery,
};
use magus::qrom::{in_hull, min_l1_decompose, qrom, qrom_lower_bound};
use magus::sim::{exact_expectation, exact_output, ideal_expectation, run_program, MagicInput, Program};
use magus::states::{enumerate_clifford_group, enumerate_stabilizer_states, CandidateScope};
use magus::{Backend, NoiseModel, PauliVector, DELTA_TH};

fn stabilizer_columns(n: usize) -> Vec<PauliVector> {
    enumerate_stabilizer_states(n).unwrap().iter().map(|s| s.vector.clone()).collect()
}

fn bloch() -> impl Strategy<Value = [f64; 3]> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y, z)| {
        let n = (x * x + y * y + z * z).sqrt();
        if n > 1.0 {
            [x / n, y / n, z / n]
        } else {
            [x, y, z]
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unit_value_iff_in_stabilizer_hull(r in bloch()) {
        let v = PauliVector::from_bloch(r);
        let cols = stabilizer_columns(1);
        let value = min_l1_decompose(&v, &cols).unwrap().value;
        let inside = in_hull(&v, &cols).unwrap();
        let octahedron = r.iter().map(|c| c.abs()).sum::<f64>() <= 1.0;
        prop_assert_eq!(inside, (value - 1.0).abs() < 1e-9);
        // away from the facets the hull test agrees with the octahedron
        if (r.iter().map(|c| c.abs()).sum::<f64>() - 1.0).abs() > 1e-6 {
            prop_assert_eq!(inside, octahedron);
        }
        prop_assert_eq!(v.entries()[0], 1.0);
    }

    #[test]
    fn rom_is_clifford_invariant(r in bloch()) {
        let v = PauliVector::from_bloch(r);
        let cols = stabilizer_columns(1);
        let base = min_l1_decompose(&v, &cols).unwrap().value;
        for c in enumerate_clifford_group(1).unwrap() {
            let w = v.clifford_image(&c.tableau);
            let value = min_l1_decompose(&w, &cols).unwrap().value;
            prop_assert!((value - base).abs() < 1e-9);
        }
    }

    #[test]
    fn two_copies_are_submultiplicative(delta in 0.0f64..0.5) {
        let one = qrom(1, 1, delta, CandidateScope::default_for(1, 1)).unwrap().value;
        let two = qrom(2, 2, delta, CandidateScope::default_for(2, 2)).unwrap().value;
        prop_assert!(two <= one * one + 1e-9);
    }

    #[test]
    fn value_is_monotone_in_delta(a in 0.0f64..0.5, b in 0.0f64..0.5) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for (t, r) in [(1, 1), (2, 1)] {
            let s = CandidateScope::default_for(t, r);
            prop_assert!(qrom(t, r, lo, s).unwrap().value <= qrom(t, r, hi, s).unwrap().value + 1e-9);
        }
    }

    #[test]
    fn saturates_above_threshold(delta in DELTA_TH..0.99) {
        let v = qrom(1, 1, delta, CandidateScope::default_for(1, 1)).unwrap().value;
        prop_assert!((v - SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn lp_sits_between_bound_and_catalog(delta in 0.0f64..DELTA_TH) {
        for (r, id) in [(1, CatalogId::T2r1), (2, CatalogId::T2r2)] {
            let lp = qrom(2, r, delta, CandidateScope::default_for(2, r)).unwrap().value;
            let lower = qrom_lower_bound(2, r, delta).unwrap();
            let catalog = state_entry(id, delta).unwrap().one_norm();
            prop_assert!(lower <= lp + 1e-9, "{lower} > {lp}");
            prop_assert!(lp <= catalog + 1e-7, "{lp} > {catalog}");
        }
    }

    #[test]
    fn catalog_norms_grow_with_delta(a in 0.0f64..DELTA_TH, b in 0.0f64..DELTA_TH) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for id in [CatalogId::K1, CatalogId::T2r1, CatalogId::T2r2, CatalogId::T3r3] {
            let x = state_entry(id, lo).unwrap().one_norm();
            let y = state_entry(id, hi).unwrap().one_norm();
            prop_assert!(x <= y + 1e-12, "{id:?}: {x} > {y}");
        }
    }

    #[test]
    fn overhead_is_monotone(
        t in 0usize..50, nc1 in 0usize..50, nc2 in 0usize..50,
        delta in 0.0f64..0.2, delta_c in 0.0f64..0.05,
    ) {
        let noise = NoiseModel::new(delta, delta_c, 0.0).unwrap();
        let base = overhead_total(&OverheadQuery { t, nc1, nc2, noise }).unwrap();
        prop_assert!(base >= 1.0);
        for q in [
            OverheadQuery { t: t + 1, nc1, nc2, noise },
            OverheadQuery { t, nc1: nc1 + 1, nc2, noise },
            OverheadQuery { t, nc1, nc2: nc2 + 1, noise },
            OverheadQuery { t, nc1, nc2, noise: NoiseModel::new(delta + 0.01, delta_c, 0.0).unwrap() },
        ] {
            prop_assert!(overhead_total(&q).unwrap() >= base);
        }
    }

    #[test]
    fn region_shrinks_with_t_and_noise(budget in 2.0f64..1e3, delta in 0.001f64..0.05, delta_c in 1e-4f64..1e-2) {
        let points = mitigable_region(&RegionQuery::new(budget, delta, delta_c, 0)).unwrap();
        for w in points.windows(2) {
            prop_assert!(w[1].nc_max <= w[0].nc_max);
        }
        let noisier = mitigable_region(&RegionQuery::new(budget, delta * 1.5, delta_c, 0)).unwrap();
        prop_assert!(noisier.len() <= points.len());
    }

    #[test]
    fn distillation_fixed_point(delta in 0.0f64..0.5) {
        let next = DistillationSchedule::new(delta, 1).unwrap().final_delta();
        if delta > 0.0 && delta < 1.0 / 7.0 {
            prop_assert!(next < delta);
        } else if delta > 1.0 / 7.0 {
            prop_assert!(next > delta);
        }
    }
}

#[test]
fn distillation_fixed_point_is_stationary() {
    let d = DistillationSchedule::new(1.0 / 7.0, 3).unwrap();
    assert!(d.deltas.iter().all(|v| (v - 1.0 / 7.0).abs() < 1e-15));
}

#[test]
fn stabilizer_states_are_closed_under_cliffords() {
    for n in 1..=2 {
        let states = enumerate_stabilizer_states(n).unwrap();
        let keys: HashSet<_> = states.iter().map(|s| s.vector.key()).collect();
        let mut gates = Vec::new();
        for q in 0..n {
            gates.extend([CliffordGate::H(q), CliffordGate::S(q), CliffordGate::Sdg(q), CliffordGate::Y(q)]);
        }
        if n == 2 {
            gates.extend([CliffordGate::Cnot(0, 1), CliffordGate::Cnot(1, 0), CliffordGate::Cz(0, 1)]);
        }
        for s in states {
            for g in &gates {
                assert!(keys.contains(&s.vector.apply_gates(&[*g]).key()));
            }
        }
    }
}

#[test]
fn clifford_tableaux_are_symplectic() {
    for c in enumerate_clifford_group(2).unwrap().iter().step_by(97) {
        assert!(c.tableau.is_symplectic());
    }
}

#[test]
fn tableau_shots_match_dense_expectation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..6 {
        let c = random_circuit(3, 0, rng.gen_range(1..=20), &mut rng);
        let exact = ideal_expectation(&c).unwrap();
        let program = Program::from_circuit(&c);
        let shots = 10_000;
        let mut sum = 0.0;
        for _ in 0..shots {
            sum += run_program(&program, &MagicInput::Zero, Backend::Tableau, &mut rng).unwrap().outcome as f64;
        }
        let mean = sum / shots as f64;
        let sigma = ((1.0 - exact * exact).max(0.0) / shots as f64).sqrt();
        assert!((mean - exact).abs() <= 3.0 * sigma + 1e-12, "{mean} vs {exact}");
    }
}

#[test]
fn gadget_applies_t_to_arbitrary_inputs() {
    let g = gadgetize(&parse_circuit("T 0\nOBS Z0").unwrap());
    let program = Program::from_circuit(&g);
    let tau = magus::tau().into_operator();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let r = {
            let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let n = (v.iter().map(|x| x * x).sum::<f64>()).sqrt().max(1.0);
            [v[0] / n, v[1] / n, v[2] / n]
        };
        let rho = PauliVector::from_bloch(r).to_operator().unwrap();
        let mut expected = rho.clone();
        expected.apply_t(0).unwrap();
        let out = exact_output(&program, &rho.tensor(&tau).unwrap()).unwrap().trace_out_high(1).unwrap();
        assert!(out.max_abs_diff(&expected).unwrap() < 1e-10);
    }
}

fn informative(rng: &mut ChaCha8Rng, n: usize, t: usize) -> magus::Circuit {
    loop {
        let c = random_circuit(n, t, 6, rng);
        if ideal_expectation(&c).unwrap().abs() > 0.1 {
            return c;
        }
    }
}

#[test]
fn outputs_are_plus_minus_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = informative(&mut rng, 2, 2);
    let mut s = Sampling::new(0.1, 0.2, 9);
    s.keep_outputs = true;
    let plan = MitigationPlan::from_catalog(&c, CatalogId::T2r1, 0.1, &s).unwrap();
    let res = plan.run(Backend::Dense).unwrap();
    let outputs = res.outputs.unwrap();
    assert_eq!(outputs.len(), res.samples);
    assert!(outputs.iter().all(|o| (o.abs() - res.one_norm).abs() < 1e-12));
}

#[test]
fn coverage_over_seeded_runs() {
    let c = parse_circuit("H 0\nT 0\nOBS X0").unwrap();
    let ideal = std::f64::consts::FRAC_1_SQRT_2;
    let hits = (0..100)
        .filter(|&seed| {
            let s = Sampling::new(0.05, 0.1, seed);
            let res = MitigationPlan::from_catalog(&c, CatalogId::K1, 0.1, &s).unwrap().run(Backend::Dense).unwrap();
            (res.mean - ideal).abs() <= 0.1
        })
        .count();
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let c = informative(&mut rng, 2, 3);
    let s = Sampling::new(0.1, 0.2, 42);
    let plan = MitigationPlan::from_catalog(&c, CatalogId::T3r3, 0.05, &s).unwrap();
    let run_with = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| plan.run(Backend::Dense).unwrap())
    };
    assert_eq!(run_with(1), run_with(4));
}

#[test]
fn noiseless_cliffords_reduce_channels_to_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = Sampling::new(0.1, 0.2, 0);
    for _ in 0..5 {
        let c = informative(&mut rng, 2, 2);
        let delta = rng.gen_range(0.0..DELTA_TH);
        let channels = MitigationPlan::channels(&c, NoiseModel::new(delta, 0.0, 0.0).unwrap(), &s).unwrap();
        let states = MitigationPlan::from_catalog(&c, CatalogId::K1, delta, &s).unwrap();
        assert!((channels.one_norm() - states.one_norm()).abs() < 1e-12);
        assert!((channels.exact_mean().unwrap() - states.exact_mean().unwrap()).abs() < 1e-10);
    }
}

#[test]
fn channel_norm_is_product_of_gate_factors() {
    let c = parse_circuit("H 0\nT 0\nCNOT 0 1\nS 1\nT 1\nH 1\nCZ 0 1\nOBS X0 X1").unwrap();
    let (delta, delta_c) = (0.05, 0.01);
    let s = Sampling::new(0.1, 0.2, 0);
    let plan = MitigationPlan::channels(&c, NoiseModel::new(delta, delta_c, 0.0).unwrap(), &s).unwrap();
    let expected = t_factor(delta, delta_c).unwrap().powi(2)
        * clifford1_factor(delta_c).unwrap().powi(3)
        * clifford2_factor(delta_c).unwrap().powi(2);
    assert!((plan.one_norm() - expected).abs() < 1e-12);
    let total = overhead_total(&OverheadQuery { t: 2, nc1: 3, nc2: 2, noise: NoiseModel::new(delta, delta_c, 0.0).unwrap() })
        .unwrap();
    assert!((plan.one_norm().powi(2) - total).abs() < 1e-9);
    assert!((plan.exact_mean().unwrap() - plan.ideal().unwrap()).abs() < 1e-10);
}

#[test]
fn perturbed_weights_are_detected() {
    let c = parse_circuit("H 0\nT 0\nOBS X0").unwrap();
    let mut blocks = block_decomposition(1, CatalogId::K1, 0.1).unwrap();
    let exact = MitigationPlan::states(&c, blocks.clone(), &Sampling::new(0.1, 0.2, 0)).unwrap();
    blocks.blocks[0] = blocks.blocks[0].perturbed(1e-3);
    assert!(blocks.blocks[0].reconstruction_error() >= 1e-4);
    let bad = MitigationPlan::states(&c, blocks, &Sampling::new(0.1, 0.2, 0)).unwrap();
    let mismatch = (bad.exact_mean().unwrap() - exact.exact_mean().unwrap()).abs()
        + (bad.one_norm() - exact.one_norm()).abs();
    assert!(mismatch >= 1e-4);
}

#[test]
fn magic_input_expectation_uses_register() {
    let g = gadgetize(&parse_circuit("H 0\nT 0\nOBS X0").unwrap());
    let ideal = exact_expectation(&g, &MagicInput::density(magus::tau())).unwrap();
    assert!((ideal - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
}
