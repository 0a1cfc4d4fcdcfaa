mod common;

use common::*;
use gmur::linalg::SymMatrix;
use gmur::mur::Thresholds;
use gmur::states::make_state_from_blocks;
use gmur::verify::{
    run_suite, vector_state_infimum, verify_scalar_minimax, verify_scalar_state_bound, verify_vector_minimax,
    Suite, SuiteConfig, DEFAULT_BUDGET, ONE_SIDED_TOL_NATS,
};
use nalgebra::DVector;

#[test]
fn state_bound_gaps_are_one_sided_on_random_states() {
    let lower = -ONE_SIDED_TOL_NATS * LOG2E;
    for seed in 0..20u64 {
        let n = 1 + (seed % 3) as usize;
        let mut r = rng(seed);
        let c = ctx(log_uniform(&mut r, 0.3, 3.0), n);
        let rho = random_rho(&mut r, c);
        let (u, v) = if n == 1 {
            (DVector::from_element(1, 1.0), DVector::from_element(1, 1.0))
        } else {
            (unit(&mut r, n), unit(&mut r, n))
        };
        let res = verify_scalar_state_bound(&rho, &u, &v, DEFAULT_BUDGET, seed).unwrap();
        assert!(res.gap >= lower && res.gap <= 1e-4, "seed {seed}: {res:?}");
        assert!(res.passed, "seed {seed}: {:?}", res.failures);
    }
}

#[test]
fn identical_seeds_give_identical_results() {
    let c = ctx(1.0, 2);
    let u = DVector::from_vec(vec![1.0, 0.0]);
    let v = DVector::from_vec(vec![0.8, 0.6]);
    let eps = Thresholds::new(0.9, 0.4).unwrap();
    let a = verify_scalar_minimax(&u, &v, &eps, c, 8_000, 99).unwrap();
    let b = verify_scalar_minimax(&u, &v, &eps, c, 8_000, 99).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

    let cfg = SuiteConfig {
        seed: 3,
        budget: 4_000,
        mc_trials: 4,
        mc_samples: 2_000,
    };
    assert_eq!(run_suite(Suite::All, &cfg).unwrap(), run_suite(Suite::All, &cfg).unwrap());
}

#[test]
fn minimax_at_the_threshold_meets_the_constant() {
    let c = ctx(1.0, 2);
    let u = DVector::from_vec(vec![1.0, 0.0]);
    let v = DVector::from_vec(vec![0.6, 0.8]);
    // ε1 ε2 = (ħ cos α / 2)² exactly.
    let eps = Thresholds::new(0.3, 0.3).unwrap();
    let res = verify_scalar_minimax(&u, &v, &eps, c, DEFAULT_BUDGET, 1).unwrap();
    assert!(res.passed, "{:?}", res.failures);
    assert!((res.analytic - s1_bits()).abs() < 1e-12);
}

#[test]
fn vector_minimax_two_modes() {
    let eps = Thresholds::new(0.5, 0.5).unwrap();
    let res = verify_vector_minimax(&eps, ctx(1.0, 2), 4 * DEFAULT_BUDGET, 2, false).unwrap();
    assert!(res.passed, "{:?}", res.failures);
    assert!((res.numeric - 2.0 * s1_bits()).abs() < 2e-4);
    // Slack and bias vanish at the optimum: B = (ħ/2) 1 and zero means.
    let b = &res.argmin_params[4..8];
    assert!((b[0] - 0.5).abs() < 1e-3 && b[1].abs() < 1e-3 && (b[3] - 0.5).abs() < 1e-3);
    assert!(res.argmin_params[8..].iter().all(|x| x.abs() < 1e-3));
    assert!(verify_vector_minimax(&eps, ctx(1.0, 5), 100, 2, false).is_err());
}

#[test]
fn vector_infimum_for_isotropic_pure_state() {
    for n in 1..=2 {
        let c = ctx(1.0, n);
        let rho = make_state_from_blocks(SymMatrix::scaled_identity(n, 0.5), SymMatrix::scaled_identity(n, 0.5), c).unwrap();
        let (inf, envelope) = vector_state_infimum(&rho, 10_000 * n * n, 4).unwrap();
        assert!((envelope - n as f64 * s1_bits()).abs() < 1e-12);
        assert!((inf - envelope).abs() < 1e-4 * n as f64, "n={n}: {inf} vs {envelope}");
    }
}
