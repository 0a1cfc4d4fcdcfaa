mod common;

use common::*;
use gmur::linalg::{det, DEFAULT_PSD_TOL};
use gmur::states::{
    make_state_with_scalar_variances, purity_info, rescale, scalar_moments, validate_state, StateJson, Validation,
};
use nalgebra::{Complex, DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

/// Smallest eigenvalue of `V + (i/2)Ω` from nalgebra's complex Hermitian solver.
fn min_eig_reference(v: &DMatrix<f64>, omega: &DMatrix<f64>) -> f64 {
    let h = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| Complex::new(v[(i, j)], 0.5 * omega[(i, j)]));
    h.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn blocks(v: &DMatrix<f64>, n: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    (
        v.view((0, 0), (n, n)).into_owned(),
        v.view((n, n), (n, n)).into_owned(),
        v.view((0, n), (n, n)).into_owned(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn validation_matches_direct_eigensolve(seed in any::<u64>(), n in 1usize..4, hbar in 0.1f64..10.0) {
        let c = ctx(hbar, n);
        let mut r = rng(seed);
        let base = random_rho(&mut r, c).variance_matrix().into_matrix();
        // Half stay valid, half are pushed toward or past the boundary.
        let v = if r.random::<bool>() {
            base
        } else {
            let w = DMatrix::from_fn(2 * n, 2 * n, |_, _| gauss(&mut r)) * (0.2 * hbar);
            base * r.random_range(0.2..1.0) + (&w + w.transpose()) * 0.5
        };
        let (a, b, cc) = blocks(&v, n);
        let verdict = validate_state(DVector::zeros(n), DVector::zeros(n), sym(a.clone()), sym(b.clone()), cc, c).unwrap();
        let m = min_eig_reference(&v, &c.omega());
        let scale = v.amax().max(1.0);
        if m > 1e-8 * scale {
            prop_assert!(verdict.is_valid(), "rejected with reference min eigenvalue {m:e}");
        }
        if m < -1e-8 * scale {
            prop_assert!(!verdict.is_valid(), "accepted with reference min eigenvalue {m:e}");
        }
        if let Validation::Invalid(f) = verdict {
            prop_assert!((f.min_eigenvalue - m).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn determinant_chain(seed in any::<u64>(), n in 1usize..5, hbar in 0.1f64..10.0, mix in 0.0f64..3.0) {
        let c = ctx(hbar, n);
        let s = gmur::states::random_state(c, mix, &mut rng(seed)).unwrap();
        let dv = det(&s.variance_matrix()).unwrap();
        let dab = det(s.pos_cov()).unwrap() * det(s.mom_cov()).unwrap();
        let pure = (hbar / 2.0).powi(2 * n as i32);
        prop_assert!(dv >= pure * (1.0 - 1e-9));
        prop_assert!(dab >= dv * (1.0 - 1e-9));
    }

    #[test]
    fn pure_states_have_commuting_cross_term(seed in any::<u64>(), n in 1usize..4, hbar in 0.3f64..3.0) {
        let c = ctx(hbar, n);
        let s = gmur::states::random_state(c, 0.0, &mut rng(seed)).unwrap();
        let info = purity_info(&s).unwrap();
        prop_assert!(info.is_pure);
        if info.is_min_uncertainty {
            let a = s.pos_cov().as_matrix();
            let cc = s.cross_cov();
            let comm = (cc * a - a * cc.transpose()).amax();
            prop_assert!(comm < 1e-6 * a.amax().max(1.0) * cc.amax().max(1.0), "{comm:e}");
        }
    }

    #[test]
    fn projected_moments_obey_robertson(seed in any::<u64>(), n in 1usize..5, hbar in 0.1f64..10.0) {
        let c = ctx(hbar, n);
        let mut r = rng(seed);
        let s = random_rho(&mut r, c);
        let (u, v) = (unit(&mut r, n), unit(&mut r, n));
        let m = scalar_moments(&s, &u, &v).unwrap();
        let lhs = m.var_q * m.var_p - m.cov_qp * m.cov_qp;
        prop_assert!(lhs >= (hbar * m.cos_alpha / 2.0).powi(2) * (1.0 - 1e-9) - 1e-12);
    }

    #[test]
    fn rescale_commutes_with_projection(seed in any::<u64>(), n in 1usize..4, sl in 1e-3f64..1e3, sp in 1e-3f64..1e3) {
        let c = ctx(1.0, n);
        let mut r = rng(seed);
        let s = random_rho(&mut r, c);
        let (u, v) = (unit(&mut r, n), unit(&mut r, n));
        let before = scalar_moments(&s, &u, &v).unwrap();
        let t = rescale(&s, sl, sp).unwrap();
        prop_assert!((t.hbar() - sl * sp).abs() < 1e-12 * sl * sp);
        let after = scalar_moments(&t, &u, &v).unwrap();
        // Quadratic forms may cancel, so measure against the size of the blocks.
        let va = t.pos_cov().max_abs() * n as f64;
        let vb = t.mom_cov().max_abs() * n as f64;
        let vc = t.cross_cov().amax() * n as f64;
        prop_assert!((after.var_q - before.var_q * sl * sl).abs() <= 1e-12 * va);
        prop_assert!((after.var_p - before.var_p * sp * sp).abs() <= 1e-12 * vb);
        prop_assert!((after.cov_qp - before.cov_qp * sl * sp).abs() <= 1e-12 * vc.max(f64::MIN_POSITIVE));
        prop_assert!(close(after.mean_q, before.mean_q * sl, 1e-12));
        prop_assert!(close(after.mean_p, before.mean_p * sp, 1e-12));
    }

    #[test]
    fn admissible_variances_are_realized(seed in any::<u64>(), n in 1usize..5, hbar in 0.1f64..10.0, branch in 0usize..3, slack in 1.0f64..10.0) {
        let c = ctx(hbar, n);
        let mut r = rng(seed);
        let u = unit(&mut r, n);
        let v = match (branch, n) {
            (0, _) | (_, 1) => u.clone(),
            (1, _) => {
                let w = unit(&mut r, n);
                (&w - &u * u.dot(&w)).normalize()
            }
            _ => unit(&mut r, n),
        };
        let cos = u.dot(&v);
        let thr = if cos.abs() <= 1e-12 { 0.0 } else { (hbar * cos / 2.0).powi(2) };
        let cq = log_uniform(&mut r, 0.05, 5.0);
        let cp = if thr > 0.0 { thr / cq * slack } else { slack / 2.0 };
        let s = make_state_with_scalar_variances(cq, cp, &u, &v, c).unwrap();
        let m = scalar_moments(&s, &u, &v).unwrap();
        prop_assert!(close(m.var_q, cq, 1e-9) && close(m.var_p, cp, 1e-9));
        if thr > 0.0 {
            prop_assert!(make_state_with_scalar_variances(cq, thr / cq * 0.9, &u, &v, c).is_err());
        }
    }

    #[test]
    fn state_json_round_trip(seed in any::<u64>(), n in 1usize..4) {
        let s = random_rho(&mut rng(seed), ctx(1.0, n));
        let text = serde_json::to_string(&StateJson::from(&s)).unwrap();
        let back: StateJson = serde_json::from_str(&text).unwrap();
        let t = back.validate(DEFAULT_PSD_TOL).unwrap().valid().unwrap();
        prop_assert_eq!(t.variance_matrix().into_matrix(), s.variance_matrix().into_matrix());
        prop_assert_eq!(t.mean(), s.mean());
    }
}

#[test]
fn boundary_state_on_the_tolerance_edge() {
    let c = ctx(1.0, 1);
    let ok = validate_state(
        DVector::zeros(1),
        DVector::zeros(1),
        sym(DMatrix::from_element(1, 1, 0.5)),
        sym(DMatrix::from_element(1, 1, 0.5 * (1.0 - 1e-12))),
        DMatrix::zeros(1, 1),
        c,
    )
    .unwrap();
    assert!(ok.is_valid());
    let bad = validate_state(
        DVector::zeros(1),
        DVector::zeros(1),
        sym(DMatrix::from_element(1, 1, 0.1)),
        sym(DMatrix::from_element(1, 1, 0.1)),
        DMatrix::zeros(1, 1),
        c,
    )
    .unwrap();
    match bad {
        Validation::Invalid(f) => assert!((f.min_eigenvalue + 0.4).abs() < 1e-12),
        Validation::Valid(_) => panic!("accepted A = B = 0.1"),
    }
}
