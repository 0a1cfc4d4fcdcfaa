//! Numerical verification of the closed forms: derivative-free searches over
//! measurement and state parameters, a Monte-Carlo check of the Gaussian
//! relative entropy, and finite-difference stationarity probes.
//!
//! Every parameter vector maps to a valid state or observable by
//! construction, so the searched sets include their boundaries (where the
//! optima sit) and no penalty terms are needed.

use std::f64::consts::LOG2_E;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::entropy::{mc_rel_entropy, rel_entropy, EntropyUnits, GaussianDist};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::mur::{
    c_inc_scalar, c_inc_scalar_nats, c_inc_vector_nats, divergence_scalar_nats,
    divergence_vector_nats, error_function_scalar, error_function_vector_both,
    state_dependent_bound_scalar, OptimalMeasurement, Regime, Thresholds,
};
use crate::observables::{from_generating_state, ScalarCovariantObservable};
use crate::optimize::{multistart, run_rng, Method, MultiOutcome, MultiStart};
use crate::states::{
    make_state_from_blocks, make_state_with_scalar_variances, random_state, scalar_moments,
    validate_state, GaussianState, PhysContext, Validation, DEGENERATE_COS_TOL,
};

pub const DEFAULT_BUDGET: usize = 20_000;
/// Numeric minima may undercut proven minima (and maxima exceed proven maxima) by at most this.
pub const ONE_SIDED_TOL_NATS: f64 = 1e-9;
pub const VALUE_TOL_BITS: f64 = 1e-4;
pub const DIVERGENCE_TOL_BITS: f64 = 1e-6;
pub const ARGMIN_REL_TOL: f64 = 1e-3;
/// Largest `n` accepted by the vector search.
pub const MAX_VECTOR_N: usize = 4;
/// Random states per audit point in the vector search.
pub const AUDIT_SAMPLES: usize = 100;

const INTERIOR_SAMPLES: usize = 20;
const AUDIT_BUDGET: usize = 2_000;

/// Outcome of one verification. Values are in bits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyResult {
    pub name: String,
    pub analytic: f64,
    pub numeric: f64,
    /// Best value found by the coordinate search, for optimizer independence.
    pub alt_numeric: f64,
    /// `numeric - analytic`.
    pub gap: f64,
    /// Physical parameters at the numeric optimum.
    pub argmin_params: Vec<f64>,
    /// Relative distance of the argmin from the closed-form optimizer.
    pub argmin_error: f64,
    pub evaluations: usize,
    pub alt_evaluations: usize,
    pub audit_evaluations: usize,
    pub budget_exhausted: bool,
    pub passed: bool,
    pub failures: Vec<String>,
}

struct Checks {
    failures: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Checks { failures: Vec::new() }
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
}

fn bits(x: f64) -> f64 {
    x * LOG2_E
}

/// Runs the primary (simplex) and alternative (coordinate) searches.
fn run_both(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    init: &(dyn Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync),
    budget: usize,
    seed: u64,
) -> (MultiOutcome, MultiOutcome) {
    let nm = multistart(f, init, &MultiStart::new(budget, seed, Method::NelderMead));
    let cs = multistart(f, init, &MultiStart::new(budget, seed, Method::CompassSearch));
    (nm, cs)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Scalar observable from search parameters:
/// `V11 = s_q e^{p0}`, `V22 = s_p (z² e^{-p0} + p1²)`,
/// `V12 = √(V11 V22 - (ħ cos α/2)²) tanh(p2)`, biases `p3 √s_q`, `p4 √s_p`.
///
/// `s_q s_p z² = (ħ cos α / 2)²` so the positivity condition holds for every `p`,
/// with equality exactly when `p1 = p2 = 0`.
fn scalar_obs_from_params(
    p: &[f64],
    s_q: f64,
    s_p: f64,
    z: f64,
    u: &DVector<f64>,
    v: &DVector<f64>,
    ctx: PhysContext,
) -> Result<ScalarCovariantObservable> {
    let bound = (ctx.hbar() * u.dot(v) / 2.0).powi(2);
    let v11 = s_q * p[0].exp();
    let v22 = s_p * (z * z * (-p[0]).exp() + p[1] * p[1]);
    let v12 = (v11 * v22 - bound).max(0.0).sqrt() * p[2].tanh();
    let m = ScalarCovariantObservable::new(
        u.clone(),
        v.clone(),
        p[3] * s_q.sqrt(),
        p[4] * s_p.sqrt(),
        v11,
        v22,
        v12,
        ctx,
    )?;
    m.into_result()
        .map_err(|f| Error::Consistency(format!("search parameters left the positivity cone: {f}")))
}

fn rel_err(x: f64, target: f64) -> f64 {
    if target == 0.0 {
        x.abs()
    } else {
        (x / target - 1.0).abs()
    }
}

/// Minimizes the scalar error over observables for a fixed state and compares
/// with the tight state-dependent bound and its optimizer.
pub fn verify_scalar_state_bound(
    rho: &GaussianState,
    u: &DVector<f64>,
    v: &DVector<f64>,
    budget: usize,
    seed: u64,
) -> Result<VerifyResult> {
    let ctx = rho.ctx();
    let mo = scalar_moments(rho, u, v)?;
    let bound = state_dependent_bound_scalar(rho, u, v, EntropyUnits::Nats)?;
    let z = bound.z_rho;
    let (vq, vp) = (mo.var_q, mo.var_p);

    let f = |p: &[f64]| -> f64 {
        scalar_obs_from_params(p, vq, vp, z, u, v, ctx)
            .and_then(|m| error_function_scalar(rho, &m, EntropyUnits::Nats))
            .unwrap_or(f64::INFINITY)
    };
    let center = if z > 0.0 { z.ln() } else { -1.0 };
    let init = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut x = vec![center + uniform(rng, -2.0, 2.0)];
        x.extend((0..4).map(|_| uniform(rng, -1.0, 1.0)));
        x
    };
    let (nm, cs) = run_both(&f, &init, budget, seed);

    let best = scalar_obs_from_params(&nm.best.x, vq, vp, z, u, v, ctx)?;
    let (v11, v22, v12) = best.noise();
    let (a, b) = best.bias();
    let (s11, s22, _) = bound.m_star.noise();
    let argmin_error = if z > 0.0 {
        rel_err(v11, s11).max(rel_err(v22, s22))
    } else {
        (v11 / vq).max(v22 / vp)
    };

    let analytic = bound.c_rho;
    let gap = nm.best.f - analytic;
    let mut c = Checks::new();
    c.require(gap >= -ONE_SIDED_TOL_NATS, || format!("numeric undercuts the bound by {gap:e} nats"));
    c.require(bits(gap) <= VALUE_TOL_BITS, || format!("gap {:e} bits exceeds tolerance", bits(gap)));
    c.require(argmin_error <= ARGMIN_REL_TOL, || format!("argmin off by {argmin_error:e}"));
    c.require(bits((cs.best.f - nm.best.f).abs()) <= VALUE_TOL_BITS, || {
        format!("optimizers disagree: {:e} vs {:e} nats", nm.best.f, cs.best.f)
    });
    c.require(nm.best.converged, || "budget exhausted before convergence".into());

    Ok(VerifyResult {
        name: "scalar_state_bound".into(),
        analytic: bits(analytic),
        numeric: bits(nm.best.f),
        alt_numeric: bits(cs.best.f),
        gap: bits(gap),
        argmin_params: vec![v11, v22, v12, a, b],
        argmin_error,
        evaluations: nm.evaluations,
        alt_evaluations: cs.evaluations,
        audit_evaluations: 0,
        budget_exhausted: !nm.best.converged,
        passed: c.failures.is_empty(),
        failures: c.failures,
    })
}

/// Maximizes the scalar error over states with `Var Q ≥ ε1`, `Var P ≥ ε2`,
/// parametrized as `Var Q = ε1 (1 + p0²)`, `Var P = ε2 (1 + p1²)`.
pub fn verify_scalar_divergence(
    m: &ScalarCovariantObservable,
    eps: &Thresholds,
    budget: usize,
    seed: u64,
) -> Result<VerifyResult> {
    let (analytic, regime) = divergence_scalar_nats(m, eps);
    if regime != Regime::AboveQuantumThreshold {
        return Err(Error::domain("divergence search needs thresholds above the quantum bound"));
    }
    let ctx = m.ctx();
    let eval = |p: &[f64]| -> Result<f64> {
        let vq = eps.eps1() * (1.0 + p[0] * p[0]);
        let vp = eps.eps2() * (1.0 + p[1] * p[1]);
        let rho = make_state_with_scalar_variances(vq, vp, m.u(), m.v(), ctx)?;
        error_function_scalar(&rho, m, EntropyUnits::Nats)
    };
    let f = |p: &[f64]| -> f64 { eval(p).map(|x| -x).unwrap_or(f64::INFINITY) };
    let init = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..2).map(|_| uniform(rng, -2.0, 2.0)).collect() };
    let (nm, cs) = run_both(&f, &init, budget, seed);

    let boundary = eval(&[0.0, 0.0])?;
    let (numeric, at) = if boundary >= -nm.best.f {
        (boundary, vec![0.0, 0.0])
    } else {
        (-nm.best.f, nm.best.x.clone())
    };
    let alt = boundary.max(-cs.best.f);
    let vq = eps.eps1() * (1.0 + at[0] * at[0]);
    let vp = eps.eps2() * (1.0 + at[1] * at[1]);
    let argmin_error = rel_err(vq, eps.eps1()).max(rel_err(vp, eps.eps2()));

    let mut c = Checks::new();
    let gap = numeric - analytic;
    c.require(gap <= ONE_SIDED_TOL_NATS, || format!("numeric exceeds the exact divergence by {gap:e} nats"));
    c.require(bits(gap.abs()) <= DIVERGENCE_TOL_BITS, || format!("gap {:e} bits", bits(gap)));
    c.require(argmin_error <= ARGMIN_REL_TOL, || format!("maximizer off the boundary by {argmin_error:e}"));
    c.require(bits((alt - numeric).abs()) <= VALUE_TOL_BITS, || {
        format!("optimizers disagree: {numeric:e} vs {alt:e} nats")
    });

    let mut rng = run_rng(seed, usize::MAX >> 1);
    for _ in 0..INTERIOR_SAMPLES {
        let p = [uniform(&mut rng, 0.1, 2.0), uniform(&mut rng, 0.1, 2.0)];
        let val = eval(&p)?;
        let ok = if analytic > 0.0 { val < analytic } else { val <= analytic + ONE_SIDED_TOL_NATS };
        c.require(ok, || format!("interior state at {p:?} reaches {val:e} nats vs {analytic:e}"));
    }

    Ok(VerifyResult {
        name: "scalar_divergence".into(),
        analytic: bits(analytic),
        numeric: bits(numeric),
        alt_numeric: bits(alt),
        gap: bits(gap),
        argmin_params: vec![vq, vp],
        argmin_error,
        evaluations: nm.evaluations + 1,
        alt_evaluations: cs.evaluations,
        audit_evaluations: INTERIOR_SAMPLES,
        budget_exhausted: !nm.best.converged,
        passed: c.failures.is_empty(),
        failures: c.failures,
    })
}

/// Minimizes the exact scalar divergence over observables and compares with
/// the incompatibility degree and its unique optimizer. The inner maximum is
/// audited numerically at the argmin.
pub fn verify_scalar_minimax(
    u: &DVector<f64>,
    v: &DVector<f64>,
    eps: &Thresholds,
    ctx: PhysContext,
    budget: usize,
    seed: u64,
) -> Result<VerifyResult> {
    let cos = u.dot(v);
    let report = c_inc_scalar(u, v, eps, ctx, EntropyUnits::Nats)?;
    if report.regime != Regime::AboveQuantumThreshold {
        return Err(Error::domain("minimax search needs thresholds above the quantum bound"));
    }
    let (analytic, _) = c_inc_scalar_nats(ctx.hbar(), cos, eps);
    let (e1, e2) = (eps.eps1(), eps.eps2());
    let z = if cos.abs() <= DEGENERATE_COS_TOL {
        0.0
    } else {
        ctx.hbar() * cos.abs() / (2.0 * eps.product().sqrt())
    };

    let f = |p: &[f64]| -> f64 {
        scalar_obs_from_params(p, e1, e2, z, u, v, ctx)
            .map(|m| divergence_scalar_nats(&m, eps).0)
            .unwrap_or(f64::INFINITY)
    };
    let center = if z > 0.0 { z.ln() } else { -1.0 };
    let init = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut x = vec![center + uniform(rng, -2.0, 2.0)];
        x.extend((0..4).map(|_| uniform(rng, -1.0, 1.0)));
        x
    };
    let (nm, cs) = run_both(&f, &init, budget, seed);

    let best = scalar_obs_from_params(&nm.best.x, e1, e2, z, u, v, ctx)?;
    let (v11, v22, v12) = best.noise();
    let (a, b) = best.bias();
    let (s11, s22) = match report.optimizer.as_ref() {
        Some(OptimalMeasurement::Scalar(m)) => (m.noise().0, m.noise().1),
        _ => return Err(Error::Consistency("scalar report without scalar optimizer".into())),
    };
    let argmin_error = if z > 0.0 {
        rel_err(v11, s11).max(rel_err(v22, s22))
    } else {
        (v11 / e1).max(v22 / e2)
    };

    let audit = verify_scalar_divergence(&best, eps, AUDIT_BUDGET, seed)?;
    let gap = nm.best.f - analytic;
    let mut c = Checks::new();
    c.require(gap >= -ONE_SIDED_TOL_NATS, || format!("numeric undercuts the proven minimum by {gap:e} nats"));
    c.require(bits(gap) <= VALUE_TOL_BITS, || format!("gap {:e} bits exceeds tolerance", bits(gap)));
    c.require(argmin_error <= ARGMIN_REL_TOL, || format!("argmin off by {argmin_error:e}"));
    c.require(bits((cs.best.f - nm.best.f).abs()) <= VALUE_TOL_BITS, || {
        format!("optimizers disagree: {:e} vs {:e} nats", nm.best.f, cs.best.f)
    });
    c.require(audit.passed, || format!("inner maximum audit failed: {:?}", audit.failures));
    c.require(nm.best.converged, || "budget exhausted before convergence".into());

    Ok(VerifyResult {
        name: "scalar_minimax".into(),
        analytic: bits(analytic),
        numeric: bits(nm.best.f),
        alt_numeric: bits(cs.best.f),
        gap: bits(gap),
        argmin_params: vec![v11, v22, v12, a, b],
        argmin_error,
        evaluations: nm.evaluations,
        alt_evaluations: cs.evaluations,
        audit_evaluations: audit.evaluations + audit.alt_evaluations + audit.audit_evaluations,
        budget_exhausted: !nm.best.converged,
        passed: c.failures.is_empty(),
        failures: c.failures,
    })
}

/// Orthogonal matrix from `n(n-1)/2` Givens angles.
fn rotation(n: usize, angles: &[f64]) -> DMatrix<f64> {
    let mut r = DMatrix::identity(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            let (s, c) = angles[k].sin_cos();
            let mut g = DMatrix::identity(n, n);
            g[(i, i)] = c;
            g[(j, j)] = c;
            g[(i, j)] = -s;
            g[(j, i)] = s;
            r *= g;
            k += 1;
        }
    }
    r
}

/// Generating state from search parameters `[angles, t, r, a, b]`:
/// `A = R diag(e^t) R^T`, `B = (ħ²/4) A^{-1} + R diag(r²) R^T`, `C = 0`,
/// means `a √ε1`, `b √ε2`.
fn vector_sigma_from_params(p: &[f64], eps: &Thresholds, ctx: PhysContext) -> Result<GaussianState> {
    let n = ctx.n();
    let na = n * (n - 1) / 2;
    let (angles, rest) = p.split_at(na);
    let (t, rest) = rest.split_at(n);
    let (r, rest) = rest.split_at(n);
    let (a, b) = rest.split_at(n);
    let rot = rotation(n, angles);
    let h2 = ctx.hbar() * ctx.hbar() / 4.0;
    let da = DMatrix::from_diagonal(&DVector::from_iterator(n, t.iter().map(|x| x.exp())));
    let db = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        t.iter().zip(r).map(|(x, y)| h2 * (-x).exp() + y * y),
    ));
    let pos = SymMatrix::symmetrize(&rot * da * rot.transpose());
    let mom = SymMatrix::symmetrize(&rot * db * rot.transpose());
    let mean_a = DVector::from_iterator(n, a.iter().map(|x| x * eps.eps1().sqrt()));
    let mean_b = DVector::from_iterator(n, b.iter().map(|x| x * eps.eps2().sqrt()));
    validate_state(mean_a, mean_b, pos, mom, DMatrix::zeros(n, n), ctx)?
        .into_result()
        .map_err(|f| Error::Consistency(format!("search parameters gave an invalid state: {f}")))
}

/// Random state with `A ⪰ ε1 1`, `B ⪰ ε2 1` and `C = 0`.
pub fn random_threshold_state(
    eps: &Thresholds,
    ctx: PhysContext,
    rng: &mut ChaCha8Rng,
) -> Result<GaussianState> {
    let n = ctx.n();
    let mut psd = |scale: f64| {
        let w = DMatrix::from_fn(n, n, |_, _| {
            let z: f64 = StandardNormal.sample(&mut *rng);
            z
        });
        SymMatrix::symmetrize(&w * w.transpose() * (scale / n as f64))
    };
    let pos = SymMatrix::scaled_identity(n, eps.eps1()).add(&psd(eps.eps1()));
    let mom = SymMatrix::scaled_identity(n, eps.eps2()).add(&psd(eps.eps2()));
    let mut gauss = || -> f64 { StandardNormal.sample(&mut *rng) };
    let a = DVector::from_fn(n, |_, _| gauss());
    let b = DVector::from_fn(n, |_, _| gauss());
    match validate_state(a, b, pos, mom, DMatrix::zeros(n, n), ctx)? {
        Validation::Valid(s) => Ok(s),
        Validation::Invalid(f) => Err(Error::domain(format!(
            "thresholds below the quantum bound admit no such state: {f}"
        ))),
    }
}

/// Checks that no sampled state in the threshold class beats the worst-case value.
fn audit_vector_point(
    sigma: &GaussianState,
    eps: &Thresholds,
    ctx: PhysContext,
    seed: u64,
    index: usize,
) -> Result<Option<String>> {
    let m = from_generating_state(sigma.clone());
    let (div, _) = divergence_vector_nats(&m, eps)?;
    let mut rng = run_rng(seed ^ 0xA0D1_7000, index);
    for _ in 0..AUDIT_SAMPLES {
        let rho = random_threshold_state(eps, ctx, &mut rng)?;
        let (val, _) = error_function_vector_both(&rho, &m)?;
        if val > div + ONE_SIDED_TOL_NATS {
            return Ok(Some(format!("sampled state reaches {val:e} nats above divergence {div:e}")));
        }
    }
    Ok(None)
}

/// Minimizes the exact vector divergence over generating states and compares
/// with the incompatibility degree and its minimum-uncertainty optimizer.
///
/// With `audit`, the final point of every restart is checked against
/// `AUDIT_SAMPLES` random states from the threshold class.
pub fn verify_vector_minimax(
    eps: &Thresholds,
    ctx: PhysContext,
    budget: usize,
    seed: u64,
    audit: bool,
) -> Result<VerifyResult> {
    let n = ctx.n();
    if n > MAX_VECTOR_N {
        return Err(Error::input(format!("vector search supports n <= {MAX_VECTOR_N}, got {n}")));
    }
    let (analytic, regime) = c_inc_vector_nats(n, ctx.hbar(), eps);
    if regime != Regime::AboveQuantumThreshold {
        return Err(Error::domain("minimax search needs thresholds above the quantum bound"));
    }
    let target = ctx.hbar() / 2.0 * (eps.eps1() / eps.eps2()).sqrt();
    let na = n * (n - 1) / 2;

    let f = |p: &[f64]| -> f64 {
        vector_sigma_from_params(p, eps, ctx)
            .and_then(|s| divergence_vector_nats(&from_generating_state(s), eps))
            .map(|(v, _)| v)
            .unwrap_or(f64::INFINITY)
    };
    let init = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut x: Vec<f64> = (0..na).map(|_| uniform(rng, 0.0, std::f64::consts::PI)).collect();
        x.extend((0..n).map(|_| target.ln() + uniform(rng, -1.5, 1.5)));
        x.extend((0..3 * n).map(|_| uniform(rng, -1.0, 1.0)));
        x
    };
    let (nm, cs) = run_both(&f, &init, budget, seed);

    let sigma = vector_sigma_from_params(&nm.best.x, eps, ctx)?;
    let dev = sigma.pos_cov().as_matrix() - DMatrix::identity(n, n) * target;
    let argmin_error = dev.amax() / target;

    let mut c = Checks::new();
    let mut audit_evaluations = 0;
    if audit {
        let points: Vec<(usize, Vec<f64>)> = nm
            .runs
            .iter()
            .map(|o| o.x.clone())
            .chain(std::iter::once(nm.best.x.clone()))
            .enumerate()
            .collect();
        let findings: Vec<Result<Option<String>>> = points
            .par_iter()
            .map(|(i, x)| {
                let s = vector_sigma_from_params(x, eps, ctx)?;
                audit_vector_point(&s, eps, ctx, seed, *i)
            })
            .collect();
        audit_evaluations = points.len() * AUDIT_SAMPLES;
        for finding in findings {
            if let Some(msg) = finding? {
                c.failures.push(msg);
            }
        }
    }

    let gap = nm.best.f - analytic;
    let tol = VALUE_TOL_BITS * n as f64;
    c.require(gap >= -ONE_SIDED_TOL_NATS, || format!("numeric undercuts the proven minimum by {gap:e} nats"));
    c.require(bits(gap) <= tol, || format!("gap {:e} bits exceeds tolerance", bits(gap)));
    c.require(argmin_error <= ARGMIN_REL_TOL, || format!("optimal A off by {argmin_error:e}"));
    c.require(bits((cs.best.f - nm.best.f).abs()) <= tol, || {
        format!("optimizers disagree: {:e} vs {:e} nats", nm.best.f, cs.best.f)
    });
    c.require(nm.best.converged, || "budget exhausted before convergence".into());

    let mut argmin_params: Vec<f64> = sigma.pos_cov().as_matrix().iter().copied().collect();
    argmin_params.extend(sigma.mom_cov().as_matrix().iter().copied());
    argmin_params.extend(sigma.mean().iter().copied());
    Ok(VerifyResult {
        name: format!("vector_minimax_n{n}"),
        analytic: bits(analytic),
        numeric: bits(nm.best.f),
        alt_numeric: bits(cs.best.f),
        gap: bits(gap),
        argmin_params,
        argmin_error,
        evaluations: nm.evaluations,
        alt_evaluations: cs.evaluations,
        audit_evaluations,
        budget_exhausted: !nm.best.converged,
        passed: c.failures.is_empty(),
        failures: c.failures,
    })
}

/// Numeric `inf_σ S(ρ, M^σ)` for an arbitrary state, reported next to the
/// envelope `n s(1)` that it can never exceed.
pub fn vector_state_infimum(rho: &GaussianState, budget: usize, seed: u64) -> Result<(f64, f64)> {
    let ctx = rho.ctx();
    let n = ctx.n();
    let unit = Thresholds::new(1.0, 1.0)?;
    let f = |p: &[f64]| -> f64 {
        vector_sigma_from_params(p, &unit, ctx)
            .and_then(|s| error_function_vector_both(rho, &from_generating_state(s)))
            .map(|(v, _)| v)
            .unwrap_or(f64::INFINITY)
    };
    let na = n * (n - 1) / 2;
    let init = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut x: Vec<f64> = (0..na).map(|_| uniform(rng, 0.0, std::f64::consts::PI)).collect();
        x.extend((0..n).map(|_| uniform(rng, -1.5, 1.5)));
        x.extend((0..3 * n).map(|_| uniform(rng, -1.0, 1.0)));
        x
    };
    let out = multistart(&f, &init, &MultiStart::new(budget, seed, Method::NelderMead));
    let envelope = n as f64 * crate::mur::s_kernel(1.0)?;
    Ok((bits(out.best.f), bits(envelope)))
}

/// Aggregate of the Monte-Carlo relative-entropy check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub name: String,
    pub trials: usize,
    pub n_samples: usize,
    pub within_5se: usize,
    pub pass_rate: f64,
    /// Largest `|mc - closed| / std_error` seen.
    pub max_z: f64,
    pub passed: bool,
}

/// Random orthogonal matrix from the QR factor of a Gaussian matrix.
fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut *rng);
        z
    });
    g.qr().q()
}

/// Random Gaussian with condition number at most `10^3`.
pub fn random_dist(dim: usize, rng: &mut ChaCha8Rng) -> Result<GaussianDist> {
    let q = random_orthogonal(dim, rng);
    let eig: Vec<f64> = (0..dim).map(|_| 10f64.powf(uniform(rng, -1.5, 1.5))).collect();
    let cov = SymMatrix::symmetrize(&q * DMatrix::from_diagonal(&DVector::from_vec(eig)) * q.transpose());
    let mean = DVector::from_fn(dim, |_, _| {
        let z: f64 = StandardNormal.sample(&mut *rng);
        z
    });
    GaussianDist::new(mean, cov)
}

/// Compares the Monte-Carlo estimator with the closed form on random pairs of
/// dimension 1 to 4. Passes when at least 99% land within five standard errors.
pub fn verify_entropy_mc(trials: usize, n_samples: usize, seed: u64) -> Result<McSummary> {
    if trials == 0 {
        return Err(Error::input("need at least one trial"));
    }
    let z_scores: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = run_rng(seed, i);
            let dim = rng.random_range(1..=4);
            let p = random_dist(dim, &mut rng)?;
            let q = random_dist(dim, &mut rng)?;
            let exact = rel_entropy(&p, &q, EntropyUnits::Nats)?;
            let mc = mc_rel_entropy(&p, &q, n_samples, rng.random(), EntropyUnits::Nats)?;
            let diff = (mc.estimate - exact).abs();
            Ok(if diff == 0.0 { 0.0 } else { diff / mc.std_error })
        })
        .collect();
    let z_scores = z_scores.into_iter().collect::<Result<Vec<f64>>>()?;
    let within = z_scores.iter().filter(|z| **z <= 5.0).count();
    let rate = within as f64 / trials as f64;
    Ok(McSummary {
        name: "entropy_mc".into(),
        trials,
        n_samples,
        within_5se: within,
        pass_rate: rate,
        max_z: z_scores.iter().copied().fold(0.0, f64::max),
        passed: rate >= 0.99,
    })
}

/// Largest central-difference derivative `|f(x + h_i e_i) - f(x - h_i e_i)| / 2h_i`
/// with `h_i = h max(1, |x_i|)`.
pub fn finite_diff_stationarity(
    objective: &dyn Fn(&[f64]) -> Result<f64>,
    point: &[f64],
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::input("step must be positive"));
    }
    let mut worst = 0.0f64;
    for i in 0..point.len() {
        let hi = h * point[i].abs().max(1.0);
        let mut x = point.to_vec();
        x[i] = point[i] + hi;
        let up = objective(&x)
            .map_err(|e| Error::domain(format!("objective failed at +h along direction {i}: {e}")))?;
        x[i] = point[i] - hi;
        let down = objective(&x)
            .map_err(|e| Error::domain(format!("objective failed at -h along direction {i}: {e}")))?;
        worst = worst.max(((up - down) / (2.0 * hi)).abs());
    }
    Ok(worst)
}

/// Whether every `±rel max(1, |x_i|)` coordinate move from `point` strictly
/// increases the objective. Returns the first offending direction otherwise.
pub fn strict_local_min(
    objective: &dyn Fn(&[f64]) -> Result<f64>,
    point: &[f64],
    rel: f64,
) -> Result<Option<usize>> {
    let f0 = objective(point)?;
    for i in 0..point.len() {
        for sign in [1.0, -1.0] {
            let mut x = point.to_vec();
            x[i] += sign * rel * point[i].abs().max(1.0);
            if objective(&x)? <= f0 {
                return Ok(Some(i));
            }
        }
    }
    Ok(None)
}

/// A smooth objective with a known optimum, in bits.
pub struct StationarityProblem {
    pub objective: Box<dyn Fn(&[f64]) -> Result<f64> + Sync>,
    pub optimum: Vec<f64>,
}

/// Scalar error around its optimal measurement, over
/// `(log V11 on the boundary surface, slack, a/√VarQ, b/√VarP)`.
pub fn scalar_state_bound_problem(
    rho: &GaussianState,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<StationarityProblem> {
    let mo = scalar_moments(rho, u, v)?;
    let z = state_dependent_bound_scalar(rho, u, v, EntropyUnits::Nats)?.z_rho;
    if z <= 0.0 {
        return Err(Error::domain("no interior optimum for orthogonal directions"));
    }
    let (rho, u, v) = (rho.clone(), u.clone(), v.clone());
    let ctx = rho.ctx();
    let objective = move |p: &[f64]| -> Result<f64> {
        let full = [p[0], p[1], 0.0, p[2], p[3]];
        let m = scalar_obs_from_params(&full, mo.var_q, mo.var_p, z, &u, &v, ctx)?;
        error_function_scalar(&rho, &m, EntropyUnits::Bits)
    };
    Ok(StationarityProblem {
        objective: Box::new(objective),
        optimum: vec![z.ln(), 0.0, 0.0, 0.0],
    })
}

/// Vector divergence around the optimal generating state, over
/// `(log-eigenvalues t, slack r, a/√ε1, b/√ε2)`. Rotations are omitted: at
/// the optimum `A ∝ 1` and they act trivially.
pub fn vector_minimax_problem(eps: &Thresholds, ctx: PhysContext) -> Result<StationarityProblem> {
    let n = ctx.n();
    let (_, regime) = c_inc_vector_nats(n, ctx.hbar(), eps);
    if regime != Regime::AboveQuantumThreshold {
        return Err(Error::domain("optimum is only characterized above the quantum bound"));
    }
    let na = n * (n - 1) / 2;
    let eps = *eps;
    let objective = move |p: &[f64]| -> Result<f64> {
        let mut full = vec![0.0; na];
        full.extend_from_slice(p);
        let s = vector_sigma_from_params(&full, &eps, ctx)?;
        Ok(bits(divergence_vector_nats(&from_generating_state(s), &eps)?.0))
    };
    let t = (ctx.hbar() / 2.0 * (eps.eps1() / eps.eps2()).sqrt()).ln();
    let mut optimum = vec![t; n];
    optimum.extend(std::iter::repeat_n(0.0, 3 * n));
    Ok(StationarityProblem {
        objective: Box::new(objective),
        optimum,
    })
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SuiteRecord {
    Result(VerifyResult),
    Mc(McSummary),
}

impl SuiteRecord {
    pub fn passed(&self) -> bool {
        match self {
            SuiteRecord::Result(r) => r.passed,
            SuiteRecord::Mc(m) => m.passed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Scalar,
    Vector,
    Entropy,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Suite::All),
            "scalar" => Ok(Suite::Scalar),
            "vector" => Ok(Suite::Vector),
            "entropy" => Ok(Suite::Entropy),
            other => Err(Error::input(format!("unknown suite '{other}'"))),
        }
    }
}

/// Sizes for a verification run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub budget: usize,
    pub mc_trials: usize,
    pub mc_samples: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0,
            budget: DEFAULT_BUDGET,
            mc_trials: 100,
            mc_samples: 100_000,
        }
    }
}

fn unit_vec(n: usize, angle: f64) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[0] = angle.cos();
    if n > 1 {
        v[1] = angle.sin();
    }
    v
}

/// Runs a fixed battery of verifications, in a deterministic order.
pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<Vec<SuiteRecord>> {
    let mut out = Vec::new();
    let seed = cfg.seed;
    if matches!(suite, Suite::All | Suite::Scalar) {
        let ctx = PhysContext::new(1.0, 2)?;
        let u = unit_vec(2, 0.0);
        let v = unit_vec(2, 0.5);
        let iso = make_state_from_blocks(
            SymMatrix::scaled_identity(2, 0.5),
            SymMatrix::scaled_identity(2, 0.5),
            ctx,
        )?;
        out.push(verify_scalar_state_bound(&iso, &u, &u, cfg.budget, seed)?);
        let mut rng = run_rng(seed, 0);
        let rho = random_state(ctx, 1.0, &mut rng)?;
        out.push(verify_scalar_state_bound(&rho, &u, &v, cfg.budget, seed)?);

        let eps = Thresholds::new(0.6, 0.8)?;
        let m = ScalarCovariantObservable::new(u.clone(), v.clone(), 0.3, -0.2, 0.6, 0.8, 0.1, ctx)?
            .into_result()
            .map_err(|f| Error::Consistency(f.to_string()))?;
        out.push(verify_scalar_divergence(&m, &eps, cfg.budget, seed)?);
        out.push(verify_scalar_minimax(&u, &v, &eps, ctx, cfg.budget, seed)?);
        let eps = Thresholds::new(2.0, 0.5)?;
        out.push(verify_scalar_minimax(&u, &u, &eps, ctx, cfg.budget, seed)?);
    }
    if matches!(suite, Suite::All | Suite::Vector) {
        for n in 1..=2 {
            let ctx = PhysContext::new(1.0, n)?;
            let eps = Thresholds::new(0.5, 0.5)?;
            out.push(verify_vector_minimax(&eps, ctx, cfg.budget * n * n, seed, true)?);
        }
    }
    let mut records: Vec<SuiteRecord> = out.into_iter().map(SuiteRecord::Result).collect();
    if matches!(suite, Suite::All | Suite::Entropy) {
        records.push(SuiteRecord::Mc(verify_entropy_mc(cfg.mc_trials, cfg.mc_samples, seed)?));
    }
    Ok(records)
}
