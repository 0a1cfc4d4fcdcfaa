//! Shared generators and reference computations for the integration tests.
#![allow(dead_code)]

use gmur::linalg::SymMatrix;
use gmur::observables::{from_generating_state, ScalarCovariantObservable, VectorCovariantObservable};
use gmur::states::{random_state, GaussianState, PhysContext};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const LOG2E: f64 = std::f64::consts::LOG2_E;

/// `s(1)` in bits, written out as `(ln 2 - 1/2) log2 e`.
pub fn s1_bits() -> f64 {
    (std::f64::consts::LN_2 - 0.5) * LOG2E
}

/// Reference `s(x) = ln(1+x) - x/(1+x)` via `ln_1p`, no series.
pub fn s_ref(x: f64) -> f64 {
    x.ln_1p() - x / (1.0 + x)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

pub fn unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| gauss(rng));
        let norm = v.norm();
        if norm > 1e-3 {
            return v / norm;
        }
    }
}

pub fn ctx(hbar: f64, n: usize) -> PhysContext {
    PhysContext::new(hbar, n).unwrap()
}

/// KL divergence in nats of `N(m1, s1) ‖ N(m2, s2)` using nalgebra's LU inverse and determinants.
pub fn kl_oracle(m1: &DVector<f64>, s1: &DMatrix<f64>, m2: &DVector<f64>, s2: &DMatrix<f64>) -> f64 {
    let k = m1.len() as f64;
    let inv = s2.clone().try_inverse().expect("invertible covariance");
    let d = m2 - m1;
    let quad = (d.transpose() * &inv * &d)[(0, 0)];
    let tr = (&inv * s1).trace();
    0.5 * (tr + quad - k + (s2.determinant() / s1.determinant()).ln())
}

/// Random valid scalar observable with positivity slack drawn at random.
pub fn random_scalar_obs(
    rng: &mut ChaCha8Rng,
    u: &DVector<f64>,
    v: &DVector<f64>,
    c: PhysContext,
) -> ScalarCovariantObservable {
    let thr = (c.hbar() * u.dot(v) / 2.0).powi(2);
    let v11 = log_uniform(rng, 0.05, 5.0);
    let v22 = thr / v11 + log_uniform(rng, 1e-3, 3.0);
    let v12 = (v11 * v22 - thr).sqrt() * rng.random_range(-0.99..0.99);
    ScalarCovariantObservable::new(u.clone(), v.clone(), gauss(rng), gauss(rng), v11, v22, v12, c)
        .unwrap()
        .valid()
        .expect("constructed inside the positivity cone")
}

pub fn random_vector_obs(rng: &mut ChaCha8Rng, c: PhysContext) -> VectorCovariantObservable {
    let mix = rng.random_range(0.0..2.0);
    from_generating_state(random_state(c, mix, rng).unwrap())
}

pub fn random_rho(rng: &mut ChaCha8Rng, c: PhysContext) -> GaussianState {
    let mix = rng.random_range(0.0..2.0);
    random_state(c, mix, rng).unwrap()
}

pub fn sym(m: DMatrix<f64>) -> SymMatrix {
    SymMatrix::symmetrize(m)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
