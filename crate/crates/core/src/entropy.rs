//! Classical information quantities for Gaussian distributions.
//!
//! Everything is computed in nats and converted at the boundary.

use std::f64::consts::{E, LOG2_E, PI};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use crate::states::{GaussianState, DEGENERATE_COS_TOL};

/// Negative round-off of a relative entropy smaller than this is clamped to zero.
pub const NEG_CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyUnits {
    #[default]
    Bits,
    Nats,
}

impl EntropyUnits {
    pub fn from_nats(self, x: f64) -> f64 {
        match self {
            EntropyUnits::Bits => x * LOG2_E,
            EntropyUnits::Nats => x,
        }
    }

    pub fn to_nats(self, x: f64) -> f64 {
        match self {
            EntropyUnits::Bits => x / LOG2_E,
            EntropyUnits::Nats => x,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntropyUnits::Bits => "bits",
            EntropyUnits::Nats => "nats",
        }
    }
}

impl std::str::FromStr for EntropyUnits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bits" => Ok(EntropyUnits::Bits),
            "nats" => Ok(EntropyUnits::Nats),
            other => Err(Error::input(format!("unknown units '{other}', expected bits or nats"))),
        }
    }
}

/// A normal distribution with positive definite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDist {
    mean: DVector<f64>,
    cov: SymMatrix,
}

impl GaussianDist {
    pub fn new(mean: DVector<f64>, cov: SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::input(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                cov.dim(),
                cov.dim()
            )));
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("mean has non-finite entries"));
        }
        let lo = cov.min_eigenvalue()?;
        if !(lo > 0.0) {
            return Err(Error::domain(format!(
                "covariance is not positive definite (min eigenvalue {lo:e})"
            )));
        }
        Ok(GaussianDist { mean, cov })
    }

    pub fn scalar(mean: f64, var: f64) -> Result<Self> {
        GaussianDist::new(DVector::from_element(1, mean), SymMatrix::from_diagonal(&[var]))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &SymMatrix {
        &self.cov
    }
}

fn same_dim(p: &GaussianDist, q: &GaussianDist) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::input(format!(
            "dimension mismatch: {} vs {}",
            p.dim(),
            q.dim()
        )));
    }
    Ok(())
}

/// Relative entropy in nats.
pub(crate) fn rel_entropy_nats(p: &GaussianDist, q: &GaussianDist) -> Result<f64> {
    same_dim(p, q)?;
    let qinv = q.cov.inverse()?;
    let d = &p.mean - &q.mean;
    let mahal = qinv.quad_form(&d);
    let tr = (qinv.as_matrix() * p.cov.as_matrix()).trace();
    let logdet = linalg::logdet(&q.cov)? - linalg::logdet(&p.cov)?;
    let s = 0.5 * (mahal + tr - p.dim() as f64 + logdet);
    if s < 0.0 {
        if s < -NEG_CLAMP_TOL {
            return Err(Error::Consistency(format!("relative entropy came out negative: {s:e}")));
        }
        return Ok(0.0);
    }
    Ok(s)
}

/// `S(p‖q)` for Gaussians.
pub fn rel_entropy(p: &GaussianDist, q: &GaussianDist, units: EntropyUnits) -> Result<f64> {
    Ok(units.from_nats(rel_entropy_nats(p, q)?))
}

/// `½ log((2πe)^n det Σ)`.
pub fn diff_entropy(p: &GaussianDist, units: EntropyUnits) -> Result<f64> {
    let n = p.dim() as f64;
    let h = 0.5 * (n * (2.0 * PI * E).ln() + linalg::logdet(&p.cov)?);
    Ok(units.from_nats(h))
}

/// Position and momentum distributions of `state` after the rescaling
/// `Q̃ = √(κ/ħ) Q`, `P̃ = (λ/√(ħκ)) P`.
pub fn dimensionless_state(
    state: &GaussianState,
    lambda: f64,
    kappa: f64,
) -> Result<(GaussianDist, GaussianDist)> {
    if !(lambda > 0.0 && kappa > 0.0) || !lambda.is_finite() || !kappa.is_finite() {
        return Err(Error::input("lambda and kappa must be positive and finite"));
    }
    let hbar = state.hbar();
    let sq = (kappa / hbar).sqrt();
    let sp = lambda / (hbar * kappa).sqrt();
    let q = GaussianDist::new(state.pos_mean() * sq, state.pos_cov().scale(sq * sq))?;
    let p = GaussianDist::new(state.mom_mean() * sp, state.mom_cov().scale(sp * sp))?;
    Ok((q, p))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::input(format!("lambda must be positive and finite, got {lambda}")));
    }
    Ok(())
}

/// `n log(πeλ)`, the minimum of `H(Q̃) + H(P̃)` over states.
pub fn pur_bound_vector(n: usize, lambda: f64, units: EntropyUnits) -> Result<f64> {
    check_lambda(lambda)?;
    if n == 0 {
        return Err(Error::input("n must be at least 1"));
    }
    Ok(units.from_nats(n as f64 * (PI * E * lambda).ln()))
}

/// `log(πeλ|cos α|)`; negative infinity when the two directions are orthogonal.
pub fn pur_bound_scalar(lambda: f64, cos_alpha: f64, units: EntropyUnits) -> Result<f64> {
    check_lambda(lambda)?;
    if !(cos_alpha.abs() <= 1.0 + 1e-12) {
        return Err(Error::input(format!("cos alpha out of range: {cos_alpha}")));
    }
    if cos_alpha.abs() <= DEGENERATE_COS_TOL {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(units.from_nats((PI * E * lambda * cos_alpha.abs()).ln()))
}

/// Monte-Carlo estimate of `S(p‖q)` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Averages `log p(x) - log q(x)` over `n_samples` draws from `p`.
pub fn mc_rel_entropy(
    p: &GaussianDist,
    q: &GaussianDist,
    n_samples: usize,
    seed: u64,
    units: EntropyUnits,
) -> Result<McEstimate> {
    same_dim(p, q)?;
    if n_samples < 100 {
        return Err(Error::input(format!("need at least 100 samples, got {n_samples}")));
    }
    let d = p.dim();
    let chol = p
        .cov
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::domain("covariance of p has no Cholesky factor"))?;
    let l = chol.l();
    let pinv = p.cov.inverse()?.into_matrix();
    let qinv = q.cov.inverse()?.into_matrix();
    let shift: Vec<f64> = (&p.mean - &q.mean).iter().copied().collect();
    let const_term = 0.5 * (linalg::logdet(&q.cov)? - linalg::logdet(&p.cov)?);

    let flat = |m: &DMatrix<f64>| -> Vec<f64> { (0..d * d).map(|k| m[(k / d, k % d)]).collect() };
    let (l, pinv, qinv) = (flat(&l), flat(&pinv), flat(&qinv));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        // x = L z is the deviation from p's mean; y is the deviation from q's mean.
        for i in 0..d {
            x[i] = (0..=i).map(|j| l[i * d + j] * z[j]).sum();
            y[i] = x[i] + shift[i];
        }
        let mut qp = 0.0;
        let mut qq = 0.0;
        for i in 0..d {
            for j in 0..d {
                qp += x[i] * pinv[i * d + j] * x[j];
                qq += y[i] * qinv[i * d + j] * y[j];
            }
        }
        let r = const_term + 0.5 * (qq - qp);
        sum += r;
        sum_sq += r * r;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        estimate: units.from_nats(mean),
        std_error: units.from_nats((var / n).sqrt()),
    })
}
