mod common;

use common::*;
use gmur::entropy::EntropyUnits;
use gmur::linalg::DEFAULT_PSD_TOL;
use gmur::mur::{
    c_inc_scalar, c_inc_scalar_nats, c_inc_vector, c_inc_vector_nats, divergence_scalar, divergence_vector,
    error_function_scalar, error_function_vector, error_function_vector_both, s_kernel,
    state_dependent_bound_scalar, MurReport, OptimalMeasurement, Regime, Thresholds,
};
use gmur::observables::{from_generating_state, BiObservableJson, ScalarCovariantObservable};
use gmur::states::{make_state_from_blocks, make_state_with_scalar_variances, StateJson};
use gmur::linalg::SymMatrix;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

const NATS: EntropyUnits = EntropyUnits::Nats;

fn dirs(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> (DVector<f64>, DVector<f64>) {
    if n == 1 {
        (DVector::from_element(1, 1.0), DVector::from_element(1, 1.0))
    } else {
        (unit(r, n), unit(r, n))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn kernel_matches_reference(x in 0.0f64..1e6) {
        let s = s_kernel(x).unwrap();
        let want = s_ref(x);
        // The reference cancels badly near zero, so compare against x²/2 there.
        if x < 1e-4 {
            prop_assert!((s - x * x * (0.5 - 2.0 * x / 3.0)).abs() <= 1e-12 * x * x + f64::MIN_POSITIVE);
        } else {
            prop_assert!((s - want).abs() <= 1e-12 * want.max(1e-300) * 10.0);
        }
        prop_assert!(s >= 0.0);
        prop_assert!(s_kernel(x * 1.5 + 1e-9).unwrap() >= s);
    }

    #[test]
    fn scalar_error_ignores_mixed_covariances(seed in any::<u64>(), n in 2usize..4) {
        let c = ctx(1.0, n);
        let mut r = rng(seed);
        let rho = random_rho(&mut r, c);
        let (u, v) = dirs(&mut r, n);
        let m = random_scalar_obs(&mut r, &u, &v, c);
        let (v11, v22, _) = m.noise();
        let (a, b) = m.bias();
        let room = (v11 * v22 - (u.dot(&v) / 2.0).powi(2)).max(0.0).sqrt();
        let with = |v12: f64| {
            ScalarCovariantObservable::new(u.clone(), v.clone(), a, b, v11, v22, v12, c).unwrap().valid().unwrap()
        };
        prop_assert_eq!(
            error_function_scalar(&rho, &with(0.0), NATS).unwrap(),
            error_function_scalar(&rho, &with(0.7 * room), NATS).unwrap()
        );

        // Same A, B and means but no cross block.
        let plain = make_state_from_blocks(rho.pos_cov().clone(), rho.mom_cov().clone(), c).unwrap()
            .with_means(rho.pos_mean().clone(), rho.mom_mean().clone()).unwrap();
        prop_assert_eq!(error_function_scalar(&rho, &m, NATS).unwrap(), error_function_scalar(&plain, &m, NATS).unwrap());
    }

    #[test]
    fn bound_hierarchy(seed in any::<u64>(), n in 1usize..4, hbar in 0.2f64..5.0) {
        let c = ctx(hbar, n);
        let mut r = rng(seed);
        let rho = random_rho(&mut r, c);
        let (u, v) = dirs(&mut r, n);
        let m = random_scalar_obs(&mut r, &u, &v, c);
        let err = error_function_scalar(&rho, &m, NATS).unwrap();
        let bound = state_dependent_bound_scalar(&rho, &u, &v, NATS).unwrap();
        prop_assert!(bound.c_rho >= 0.0);
        prop_assert!(err >= bound.c_rho - 1e-12);
        prop_assert!((error_function_scalar(&rho, &bound.m_star, NATS).unwrap() - bound.c_rho).abs() < 1e-12);

        // Thresholds below the sharp variances of rho put rho in the threshold class.
        let mo = gmur::states::scalar_moments(&rho, &u, &v).unwrap();
        let eps = Thresholds::new(mo.var_q * r.random_range(0.2..1.0), mo.var_p * r.random_range(0.2..1.0)).unwrap();
        let div = divergence_scalar(&m, &eps, NATS).unwrap();
        if div.regime == Regime::AboveQuantumThreshold {
            prop_assert!(div.value >= err - 1e-12);
        }

        let mv = random_vector_obs(&mut r, c);
        let ev = error_function_vector(&rho, &mv, NATS).unwrap();
        let (sef, snr) = error_function_vector_both(&rho, &mv).unwrap();
        prop_assert!((sef - snr).abs() <= 1e-9 * sef.abs().max(1e-300));
        let epsv = Thresholds::new(
            rho.pos_cov().min_eigenvalue().unwrap() * r.random_range(0.2..1.0),
            rho.mom_cov().min_eigenvalue().unwrap() * r.random_range(0.2..1.0),
        ).unwrap();
        let dv = divergence_vector(&mv, &epsv, NATS).unwrap();
        if dv.regime == Regime::AboveQuantumThreshold {
            prop_assert!(dv.value >= ev - 1e-12);
        }
    }

    #[test]
    fn incompatibility_is_monotone_and_continuous(hbar in 0.1f64..10.0, cos in -1.0f64..1.0, ratio in 0.05f64..20.0, n in 1usize..5) {
        let thr_s = (hbar * cos / 2.0).powi(2);
        let thr_v = hbar * hbar / 4.0;
        for thr in [thr_s, thr_v] {
            prop_assume!(thr > 1e-8);
            let mut prev = f64::INFINITY;
            for k in 0..30 {
                let prod = thr * 1.3f64.powi(k);
                let eps = Thresholds::new((prod * ratio).sqrt(), (prod / ratio).sqrt()).unwrap();
                let (vs, _) = c_inc_scalar_nats(hbar, cos, &eps);
                let (vv, _) = c_inc_vector_nats(n, hbar, &eps);
                let val = if thr == thr_s { vs } else { vv };
                prop_assert!(val <= prev + 1e-15);
                prev = val;
            }
        }
        prop_assume!(thr_s > 1e-8);
        let at = Thresholds::new((thr_s * ratio).sqrt(), (thr_s / ratio).sqrt()).unwrap();
        let below = Thresholds::new(at.eps1(), at.eps2() * (1.0 - 1e-6)).unwrap();
        prop_assert!((c_inc_scalar_nats(hbar, cos, &at).0 - c_inc_scalar_nats(hbar, cos, &below).0).abs() < 1e-12);
    }

    #[test]
    fn reports_round_trip_and_revalidate(seed in any::<u64>(), n in 2usize..4, e1 in 0.05f64..3.0, e2 in 0.05f64..3.0) {
        let c = ctx(1.0, n);
        let mut r = rng(seed);
        let (u, v) = (unit(&mut r, n), unit(&mut r, n));
        let eps = Thresholds::new(e1, e2).unwrap();
        let reports: Vec<MurReport> = vec![
            c_inc_scalar(&u, &v, &eps, c, EntropyUnits::Bits).unwrap(),
            c_inc_vector(&eps, c, EntropyUnits::Bits).unwrap(),
        ];
        for rep in reports {
            let json: serde_json::Value = serde_json::to_value(&rep).unwrap();
            let state: StateJson = serde_json::from_value(json["worst_state"].clone()).unwrap();
            let worst = state.validate(DEFAULT_PSD_TOL).unwrap().valid();
            prop_assert!(worst.is_some());
            let opt = json["optimizer"].clone();
            let obs_ok = match rep.optimizer.as_ref().unwrap() {
                OptimalMeasurement::Scalar(_) => {
                    let s: gmur::observables::ScalarObservableJson = serde_json::from_value(opt).unwrap();
                    s.validate().unwrap().is_valid()
                }
                OptimalMeasurement::Vector(_) => {
                    let t: BiObservableJson = serde_json::from_value(opt).unwrap();
                    t.validate(DEFAULT_PSD_TOL).unwrap().is_valid()
                }
            };
            prop_assert!(obs_ok);
            if rep.is_exact {
                let worst = worst.unwrap();
                let attained = match rep.optimizer.as_ref().unwrap() {
                    OptimalMeasurement::Scalar(m) => error_function_scalar(&worst, m, EntropyUnits::Bits).unwrap(),
                    OptimalMeasurement::Vector(m) => error_function_vector(&worst, m, EntropyUnits::Bits).unwrap(),
                };
                prop_assert!((attained - rep.value).abs() < 1e-10, "{attained} vs {} ({:?}) cos {}", rep.value, rep.regime, u.dot(&v));
            }
        }
    }
}

#[test]
fn vector_value_is_linear_in_n() {
    let eps = Thresholds::new(0.7, 0.3).unwrap();
    let one = c_inc_vector_nats(1, 1.0, &eps).0;
    for n in 2..8 {
        assert!((c_inc_vector_nats(n, 1.0, &eps).0 - n as f64 * one).abs() < 1e-14 * n as f64);
    }
}

#[test]
fn limits_in_angle_and_hbar() {
    let eps = Thresholds::new(0.5, 0.5).unwrap();
    let mut prev = f64::INFINITY;
    for k in 0..=50 {
        let alpha = std::f64::consts::FRAC_PI_2 * (1.0 - 0.5f64.powi(k));
        let (val, _) = c_inc_scalar_nats(1.0, alpha.cos(), &eps);
        assert!(val <= prev);
        prev = val;
    }
    assert!(prev < 1e-25);
    let small = c_inc_vector_nats(3, 1e-7, &eps).0;
    assert!(small > 0.0 && small < 1e-13);
}

#[test]
fn macroscopic_measurements_have_tiny_error() {
    // Noise at 1e-3 of the thresholds; ħ small enough that this noise is admissible.
    for n in 1..=3 {
        let c = ctx(1e-3, n);
        let iso = |a: f64, b: f64| {
            make_state_from_blocks(SymMatrix::scaled_identity(n, a), SymMatrix::scaled_identity(n, b), c).unwrap()
        };
        let m = from_generating_state(iso(1e-3, 2e-3));
        let worst = iso(1.0, 2.0);
        let e = error_function_vector(&worst, &m, EntropyUnits::Bits).unwrap();
        assert!(e <= n as f64 * 1e-6 * LOG2E, "{e}");
        assert!(e > 0.0);
    }
}

#[test]
fn worst_scalar_state_attains_divergence() {
    let c = ctx(1.0, 2);
    let u = DVector::from_vec(vec![1.0, 0.0]);
    let v = DVector::from_vec(vec![0.6, 0.8]);
    let m = ScalarCovariantObservable::new(u.clone(), v.clone(), 0.2, -0.1, 0.4, 0.5, 0.05, c)
        .unwrap()
        .valid()
        .unwrap();
    let eps = Thresholds::new(0.6, 0.4).unwrap();
    let rep = divergence_scalar(&m, &eps, NATS).unwrap();
    assert!(rep.is_exact);
    let worst = rep.worst_state.clone().unwrap();
    assert!((error_function_scalar(&worst, &m, NATS).unwrap() - rep.value).abs() < 1e-12);
    let rho = make_state_with_scalar_variances(0.9, 0.7, &u, &v, c).unwrap();
    assert!(error_function_scalar(&rho, &m, NATS).unwrap() < rep.value);
}
