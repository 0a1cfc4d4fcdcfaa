//! Entropic measurement uncertainty: error functions, state-dependent bounds,
//! divergences over threshold classes of states, and incompatibility degrees.
//!
//! All bounds are built from the kernel `s(x) = ln(1+x) - x/(1+x)`.

use nalgebra::DVector;
use serde::{Serialize, Serializer};

use crate::entropy::EntropyUnits;
use crate::error::{Error, Result};
use crate::linalg::{sandwich, trace_func, SymMatrix};
use crate::observables::{
    from_generating_state, sharp_projected, BiObservableJson, ScalarCovariantObservable,
    ScalarObservableJson, VectorCovariantObservable,
};
use crate::states::{
    check_unit, make_state_from_blocks, make_state_with_scalar_variances, rescale,
    scalar_moments, GaussianState, PhysContext, StateJson, DEGENERATE_COS_TOL,
};

/// Relative tolerance when comparing `ε1 ε2` with the quantum threshold.
pub const REGIME_REL_TOL: f64 = 1e-12;

/// Maximum relative disagreement allowed between the two vector error-function forms.
pub const SEF_SNR_REL_TOL: f64 = 1e-9;

/// Below this argument the kernel is summed as a power series.
const SERIES_CUTOFF: f64 = 0.1;

fn s_unchecked(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        // Σ_{k≥2} (-1)^k (k-1)/k x^k; the closed form cancels badly near zero.
        let mut sum = 0.0;
        let mut pow = x * x;
        for k in 2..24 {
            let kf = k as f64;
            let term = pow * (kf - 1.0) / kf;
            sum += if k % 2 == 0 { term } else { -term };
            pow *= x;
        }
        sum
    } else {
        x.ln_1p() - x / (1.0 + x)
    }
}

/// `s(x) = ln(1+x) - x/(1+x)` in nats.
pub fn s_kernel(x: f64) -> Result<f64> {
    if !(x >= 0.0) || x.is_infinite() {
        return Err(Error::domain(format!("s(x) needs finite x >= 0, got {x}")));
    }
    Ok(s_unchecked(x))
}

/// `s` applied to a matrix spectrum; tiny negative eigenvalues from round-off count as zero.
fn trace_s(m: &SymMatrix) -> Result<f64> {
    let tol = 1e-12 * m.max_abs().max(1.0);
    trace_func(m, |x| {
        if x >= 0.0 {
            s_unchecked(x)
        } else if x >= -tol {
            0.0
        } else {
            f64::NAN
        }
    })
}

/// Lower variance thresholds `(ε1, ε2)` defining the class of test states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    eps1: f64,
    eps2: f64,
}

impl Thresholds {
    pub fn new(eps1: f64, eps2: f64) -> Result<Self> {
        if !(eps1 > 0.0 && eps2 > 0.0) || !eps1.is_finite() || !eps2.is_finite() {
            return Err(Error::input(format!(
                "thresholds must be positive and finite, got ({eps1}, {eps2})"
            )));
        }
        Ok(Thresholds { eps1, eps2 })
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    pub fn eps2(&self) -> f64 {
        self.eps2
    }

    pub fn product(&self) -> f64 {
        self.eps1 * self.eps2
    }

    pub fn rescaled(&self, length_scale: f64, momentum_scale: f64) -> Result<Self> {
        Thresholds::new(
            self.eps1 * length_scale * length_scale,
            self.eps2 * momentum_scale * momentum_scale,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    AboveQuantumThreshold,
    BelowQuantumThreshold,
}

impl Regime {
    /// Boundary points are classified above; both formulas agree there.
    pub fn classify(eps: &Thresholds, threshold: f64) -> Regime {
        if eps.product() >= threshold * (1.0 - REGIME_REL_TOL) {
            Regime::AboveQuantumThreshold
        } else {
            Regime::BelowQuantumThreshold
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::AboveQuantumThreshold => "above_quantum_threshold",
            Regime::BelowQuantumThreshold => "below_quantum_threshold",
        }
    }
}

/// An optimal joint measurement.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimalMeasurement {
    Scalar(ScalarCovariantObservable),
    Vector(VectorCovariantObservable),
}

#[derive(Serialize)]
#[serde(untagged)]
enum MeasurementJson {
    Scalar(ScalarObservableJson),
    Triple(BiObservableJson),
}

/// Result of a divergence or incompatibility-degree computation.
///
/// `is_exact` is false when only a lower bound is known.
#[derive(Debug, Clone, PartialEq)]
pub struct MurReport {
    pub value: f64,
    pub units: EntropyUnits,
    pub regime: Regime,
    pub is_exact: bool,
    pub optimizer: Option<OptimalMeasurement>,
    pub worst_state: Option<GaussianState>,
}

#[derive(Serialize)]
struct MurReportJson {
    value: f64,
    units: EntropyUnits,
    regime: Regime,
    is_exact: bool,
    optimizer: Option<MeasurementJson>,
    worst_state: Option<StateJson>,
}

impl Serialize for MurReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let optimizer = self.optimizer.as_ref().map(|m| match m {
            OptimalMeasurement::Scalar(s) => MeasurementJson::Scalar(s.into()),
            OptimalMeasurement::Vector(v) => MeasurementJson::Triple(v.into()),
        });
        MurReportJson {
            value: self.value,
            units: self.units,
            regime: self.regime,
            is_exact: self.is_exact,
            optimizer,
            worst_state: self.worst_state.as_ref().map(StateJson::from),
        }
        .serialize(serializer)
    }
}

fn same_ctx(a: PhysContext, b: PhysContext) -> Result<()> {
    let (h1, h2) = (a.hbar(), b.hbar());
    if a.n() != b.n() || (h1 - h2).abs() > 1e-12 * h1.max(h2) {
        return Err(Error::input(format!(
            "context mismatch: (hbar {h1}, n {}) vs (hbar {h2}, n {})",
            a.n(),
            b.n()
        )));
    }
    Ok(())
}

/// Closed form of the scalar error in nats given the sharp variances.
fn scalar_error_nats(var_q: f64, var_p: f64, m: &ScalarCovariantObservable) -> f64 {
    let (v11, v22, _) = m.noise();
    let (a, b) = m.bias();
    let delta = a * a / (var_q + v11) + b * b / (var_p + v22);
    0.5 * (s_unchecked(v11 / var_q) + s_unchecked(v22 / var_p) + delta)
}

/// `S(ρ, M)`: sum of the relative entropies of the sharp `Q_u`, `P_v`
/// distributions with respect to the marginals of `M`.
pub fn error_function_scalar(
    rho: &GaussianState,
    m: &ScalarCovariantObservable,
    units: EntropyUnits,
) -> Result<f64> {
    same_ctx(rho.ctx(), m.ctx())?;
    let mo = scalar_moments(rho, m.u(), m.v())?;
    Ok(units.from_nats(scalar_error_nats(mo.var_q, mo.var_p, m)))
}

/// Both forms of the vector error in nats: via `E = A_ρ^{-1/2} A_σ A_ρ^{-1/2}`
/// and via `N = A_σ^{-1/2} A_ρ A_σ^{-1/2}`.
pub fn error_function_vector_both(
    rho: &GaussianState,
    m: &VectorCovariantObservable,
) -> Result<(f64, f64)> {
    same_ctx(rho.ctx(), m.ctx())?;
    let sigma = m.sigma();
    let bias = {
        let sum_a = rho.pos_cov().add(sigma.pos_cov()).inverse()?;
        let sum_b = rho.mom_cov().add(sigma.mom_cov()).inverse()?;
        sum_a.quad_form(sigma.pos_mean()) + sum_b.quad_form(sigma.mom_mean())
    };
    let e = sandwich(rho.pos_cov(), sigma.pos_cov())?;
    let f = sandwich(rho.mom_cov(), sigma.mom_cov())?;
    let sef = 0.5 * (trace_s(&e)? + trace_s(&f)? + bias);

    let inv_s = |t: f64| s_unchecked(1.0 / t);
    let na = sandwich(sigma.pos_cov(), rho.pos_cov())?;
    let nb = sandwich(sigma.mom_cov(), rho.mom_cov())?;
    let snr = 0.5 * (trace_func(&na, inv_s)? + trace_func(&nb, inv_s)? + bias);
    Ok((sef, snr))
}

/// `S(ρ, M^σ)` for a covariant phase-space observable.
pub fn error_function_vector(
    rho: &GaussianState,
    m: &VectorCovariantObservable,
    units: EntropyUnits,
) -> Result<f64> {
    let (sef, snr) = error_function_vector_both(rho, m)?;
    if (sef - snr).abs() > SEF_SNR_REL_TOL * sef.abs() + 1e-15 {
        return Err(Error::Consistency(format!(
            "error function forms disagree: {sef:e} vs {snr:e} nats"
        )));
    }
    Ok(units.from_nats(sef))
}

/// The tight state-dependent lower bound and its unique optimal measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBound {
    pub c_rho: f64,
    pub z_rho: f64,
    pub m_star: ScalarCovariantObservable,
}

/// `inf_M S(ρ, M) = s(z_ρ)` with `z_ρ = ħ|cos α| / (2 √(Var Q Var P))`.
pub fn state_dependent_bound_scalar(
    rho: &GaussianState,
    u: &DVector<f64>,
    v: &DVector<f64>,
    units: EntropyUnits,
) -> Result<StateBound> {
    let mo = scalar_moments(rho, u, v)?;
    let ctx = rho.ctx();
    let cos = mo.cos_alpha.abs();
    if cos <= DEGENERATE_COS_TOL {
        return Ok(StateBound {
            c_rho: 0.0,
            z_rho: 0.0,
            m_star: sharp_projected(u, v, ctx)?,
        });
    }
    let hbar = ctx.hbar();
    let z = hbar * cos / (2.0 * (mo.var_q * mo.var_p).sqrt());
    let v11 = hbar / 2.0 * (mo.var_q / mo.var_p).sqrt() * cos;
    let v22 = hbar / 2.0 * (mo.var_p / mo.var_q).sqrt() * cos;
    let m_star = ScalarCovariantObservable::trusted(u.clone(), v.clone(), 0.0, 0.0, v11, v22, 0.0, ctx)?;
    Ok(StateBound {
        c_rho: units.from_nats(s_unchecked(z)),
        z_rho: z,
        m_star,
    })
}

fn scalar_threshold(hbar: f64, cos: f64) -> f64 {
    (hbar * cos / 2.0).powi(2)
}

/// Sharp variances of the worst-case state for `M` in the class `𝒢_ε`.
fn scalar_worst_variances(eps: &Thresholds, hbar: f64, cos: f64) -> (Regime, f64, f64) {
    match Regime::classify(eps, scalar_threshold(hbar, cos)) {
        Regime::AboveQuantumThreshold => (Regime::AboveQuantumThreshold, eps.eps1, eps.eps2),
        Regime::BelowQuantumThreshold => (
            Regime::BelowQuantumThreshold,
            eps.eps1,
            scalar_threshold(hbar, cos) / eps.eps1,
        ),
    }
}

/// Divergence value in nats and the regime, without building the worst state.
pub fn divergence_scalar_nats(m: &ScalarCovariantObservable, eps: &Thresholds) -> (f64, Regime) {
    let (regime, vq, vp) = scalar_worst_variances(eps, m.ctx().hbar(), m.cos_alpha());
    (scalar_error_nats(vq, vp, m), regime)
}

/// `D_ε(Q_u, P_v ‖ M) = sup over 𝒢_ε of S(ρ, M)`; exact above the quantum
/// threshold `ε1 ε2 ≥ (ħ cos α / 2)²`, a lower bound below it.
pub fn divergence_scalar(
    m: &ScalarCovariantObservable,
    eps: &Thresholds,
    units: EntropyUnits,
) -> Result<MurReport> {
    let (regime, vq, vp) = scalar_worst_variances(eps, m.ctx().hbar(), m.cos_alpha());
    let worst = make_state_with_scalar_variances(vq, vp, m.u(), m.v(), m.ctx())?;
    Ok(MurReport {
        value: units.from_nats(scalar_error_nats(vq, vp, m)),
        units,
        regime,
        is_exact: regime == Regime::AboveQuantumThreshold,
        optimizer: None,
        worst_state: Some(worst),
    })
}

/// Optimal measurement for the scalar incompatibility degree.
fn scalar_optimizer(
    u: &DVector<f64>,
    v: &DVector<f64>,
    eps: &Thresholds,
    ctx: PhysContext,
) -> Result<(Regime, ScalarCovariantObservable)> {
    let hbar = ctx.hbar();
    let cos = u.dot(v);
    if cos.abs() <= DEGENERATE_COS_TOL {
        return Ok((Regime::AboveQuantumThreshold, sharp_projected(u, v, ctx)?));
    }
    let thr = scalar_threshold(hbar, cos);
    let regime = Regime::classify(eps, thr);
    let (v11, v22) = match regime {
        Regime::AboveQuantumThreshold => {
            let r = (eps.eps1 / eps.eps2).sqrt();
            (hbar / 2.0 * r * cos.abs(), hbar / 2.0 / r * cos.abs())
        }
        Regime::BelowQuantumThreshold => (eps.eps1, thr / eps.eps1),
    };
    let m = ScalarCovariantObservable::trusted(u.clone(), v.clone(), 0.0, 0.0, v11, v22, 0.0, ctx)?;
    Ok((regime, m))
}

/// Closed-form scalar incompatibility degree in nats.
pub fn c_inc_scalar_nats(hbar: f64, cos_alpha: f64, eps: &Thresholds) -> (f64, Regime) {
    let cos = cos_alpha.abs();
    if cos <= DEGENERATE_COS_TOL {
        return (0.0, Regime::AboveQuantumThreshold);
    }
    match Regime::classify(eps, scalar_threshold(hbar, cos)) {
        Regime::AboveQuantumThreshold => (
            s_unchecked(hbar * cos / (2.0 * eps.product().sqrt())),
            Regime::AboveQuantumThreshold,
        ),
        Regime::BelowQuantumThreshold => (s_unchecked(1.0), Regime::BelowQuantumThreshold),
    }
}

/// `c_inc = inf_M D_ε(Q_u, P_v ‖ M)`: exact above the threshold, the constant
/// lower bound `s(1)` below it.
pub fn c_inc_scalar(
    u: &DVector<f64>,
    v: &DVector<f64>,
    eps: &Thresholds,
    ctx: PhysContext,
    units: EntropyUnits,
) -> Result<MurReport> {
    check_unit(u, ctx.n(), "direction u")?;
    check_unit(v, ctx.n(), "direction v")?;
    let (value, regime) = c_inc_scalar_nats(ctx.hbar(), u.dot(v), eps);
    let (_, m) = scalar_optimizer(u, v, eps, ctx)?;
    let worst = divergence_scalar(&m, eps, units)?.worst_state;
    Ok(MurReport {
        value: units.from_nats(value),
        units,
        regime,
        is_exact: regime == Regime::AboveQuantumThreshold,
        optimizer: Some(OptimalMeasurement::Scalar(m)),
        worst_state: worst,
    })
}

fn vector_threshold(hbar: f64) -> f64 {
    hbar * hbar / 4.0
}

fn vector_worst_state(eps: &Thresholds, ctx: PhysContext) -> Result<(Regime, GaussianState)> {
    let n = ctx.n();
    let regime = Regime::classify(eps, vector_threshold(ctx.hbar()));
    let b = match regime {
        Regime::AboveQuantumThreshold => eps.eps2,
        Regime::BelowQuantumThreshold => vector_threshold(ctx.hbar()) / eps.eps1,
    };
    let state = make_state_from_blocks(
        SymMatrix::scaled_identity(n, eps.eps1),
        SymMatrix::scaled_identity(n, b),
        ctx,
    )?;
    Ok((regime, state))
}

/// Divergence value in nats; above the threshold this is the closed form
/// `½[Tr s(A_σ/ε1) + Tr s(B_σ/ε2) + a_σ·(A_σ+ε1)^{-1}a_σ + b_σ·(B_σ+ε2)^{-1}b_σ]`.
pub fn divergence_vector_nats(
    m: &VectorCovariantObservable,
    eps: &Thresholds,
) -> Result<(f64, Regime)> {
    let ctx = m.ctx();
    let n = ctx.n();
    let regime = Regime::classify(eps, vector_threshold(ctx.hbar()));
    match regime {
        Regime::AboveQuantumThreshold => {
            let sigma = m.sigma();
            let tr = trace_s(&sigma.pos_cov().scale(1.0 / eps.eps1))?
                + trace_s(&sigma.mom_cov().scale(1.0 / eps.eps2))?;
            let bias = sigma
                .pos_cov()
                .add(&SymMatrix::scaled_identity(n, eps.eps1))
                .inverse()?
                .quad_form(sigma.pos_mean())
                + sigma
                    .mom_cov()
                    .add(&SymMatrix::scaled_identity(n, eps.eps2))
                    .inverse()?
                    .quad_form(sigma.mom_mean());
            Ok((0.5 * (tr + bias), regime))
        }
        Regime::BelowQuantumThreshold => {
            let (_, worst) = vector_worst_state(eps, ctx)?;
            let (sef, _) = error_function_vector_both(&worst, m)?;
            Ok((sef, regime))
        }
    }
}

/// `D_ε(Q, P ‖ M^σ)`: exact above `ε1 ε2 ≥ ħ²/4`, a lower bound below.
pub fn divergence_vector(
    m: &VectorCovariantObservable,
    eps: &Thresholds,
    units: EntropyUnits,
) -> Result<MurReport> {
    let (value, regime) = divergence_vector_nats(m, eps)?;
    let (_, worst) = vector_worst_state(eps, m.ctx())?;
    Ok(MurReport {
        value: units.from_nats(value),
        units,
        regime,
        is_exact: regime == Regime::AboveQuantumThreshold,
        optimizer: None,
        worst_state: Some(worst),
    })
}

/// Closed-form vector incompatibility degree in nats.
pub fn c_inc_vector_nats(n: usize, hbar: f64, eps: &Thresholds) -> (f64, Regime) {
    match Regime::classify(eps, vector_threshold(hbar)) {
        Regime::AboveQuantumThreshold => (
            n as f64 * s_unchecked(hbar / (2.0 * eps.product().sqrt())),
            Regime::AboveQuantumThreshold,
        ),
        Regime::BelowQuantumThreshold => (n as f64 * s_unchecked(1.0), Regime::BelowQuantumThreshold),
    }
}

/// Generating state of the optimal covariant observable.
pub fn c_inc_vector_optimizer(eps: &Thresholds, ctx: PhysContext) -> Result<GaussianState> {
    let n = ctx.n();
    let hbar = ctx.hbar();
    let (a, b) = match Regime::classify(eps, vector_threshold(hbar)) {
        Regime::AboveQuantumThreshold => {
            let r = (eps.eps1 / eps.eps2).sqrt();
            (hbar / 2.0 * r, hbar / 2.0 / r)
        }
        Regime::BelowQuantumThreshold => (eps.eps1, vector_threshold(hbar) / eps.eps1),
    };
    make_state_from_blocks(
        SymMatrix::scaled_identity(n, a),
        SymMatrix::scaled_identity(n, b),
        ctx,
    )
}

/// `c_inc = inf_σ D_ε(Q, P ‖ M^σ)` for `n` degrees of freedom (taken from `ctx`).
pub fn c_inc_vector(eps: &Thresholds, ctx: PhysContext, units: EntropyUnits) -> Result<MurReport> {
    let (value, regime) = c_inc_vector_nats(ctx.n(), ctx.hbar(), eps);
    let sigma = c_inc_vector_optimizer(eps, ctx)?;
    let (_, worst) = vector_worst_state(eps, ctx)?;
    Ok(MurReport {
        value: units.from_nats(value),
        units,
        regime,
        is_exact: regime == Regime::AboveQuantumThreshold,
        optimizer: Some(OptimalMeasurement::Vector(from_generating_state(sigma))),
        worst_state: Some(worst),
    })
}

/// A quantity that can be re-evaluated after a change of units.
#[derive(Debug, Clone)]
pub enum MurQuantity {
    ErrorScalar {
        rho: GaussianState,
        m: ScalarCovariantObservable,
    },
    ErrorVector {
        rho: GaussianState,
        m: VectorCovariantObservable,
    },
    StateBoundScalar {
        rho: GaussianState,
        u: DVector<f64>,
        v: DVector<f64>,
    },
    DivergenceScalar {
        m: ScalarCovariantObservable,
        eps: Thresholds,
    },
    DivergenceVector {
        m: VectorCovariantObservable,
        eps: Thresholds,
    },
    CIncScalar {
        u: DVector<f64>,
        v: DVector<f64>,
        eps: Thresholds,
        ctx: PhysContext,
    },
    CIncVector {
        eps: Thresholds,
        ctx: PhysContext,
    },
}

impl MurQuantity {
    pub fn evaluate(&self, units: EntropyUnits) -> Result<f64> {
        match self {
            MurQuantity::ErrorScalar { rho, m } => error_function_scalar(rho, m, units),
            MurQuantity::ErrorVector { rho, m } => error_function_vector(rho, m, units),
            MurQuantity::StateBoundScalar { rho, u, v } => {
                Ok(state_dependent_bound_scalar(rho, u, v, units)?.c_rho)
            }
            MurQuantity::DivergenceScalar { m, eps } => Ok(divergence_scalar(m, eps, units)?.value),
            MurQuantity::DivergenceVector { m, eps } => Ok(divergence_vector(m, eps, units)?.value),
            MurQuantity::CIncScalar { u, v, eps, ctx } => Ok(c_inc_scalar(u, v, eps, *ctx, units)?.value),
            MurQuantity::CIncVector { eps, ctx } => Ok(c_inc_vector(eps, *ctx, units)?.value),
        }
    }

    /// The same quantity with lengths scaled by `s_L` and momenta by `s_P`.
    pub fn rescaled(&self, sl: f64, sp: f64) -> Result<MurQuantity> {
        let ctx_of = |c: &PhysContext| PhysContext::new(c.hbar() * sl * sp, c.n());
        let vec_obs = |m: &VectorCovariantObservable| -> Result<VectorCovariantObservable> {
            Ok(from_generating_state(rescale(m.sigma(), sl, sp)?))
        };
        Ok(match self {
            MurQuantity::ErrorScalar { rho, m } => MurQuantity::ErrorScalar {
                rho: rescale(rho, sl, sp)?,
                m: m.rescaled(sl, sp)?,
            },
            MurQuantity::ErrorVector { rho, m } => MurQuantity::ErrorVector {
                rho: rescale(rho, sl, sp)?,
                m: vec_obs(m)?,
            },
            MurQuantity::StateBoundScalar { rho, u, v } => MurQuantity::StateBoundScalar {
                rho: rescale(rho, sl, sp)?,
                u: u.clone(),
                v: v.clone(),
            },
            MurQuantity::DivergenceScalar { m, eps } => MurQuantity::DivergenceScalar {
                m: m.rescaled(sl, sp)?,
                eps: eps.rescaled(sl, sp)?,
            },
            MurQuantity::DivergenceVector { m, eps } => MurQuantity::DivergenceVector {
                m: vec_obs(m)?,
                eps: eps.rescaled(sl, sp)?,
            },
            MurQuantity::CIncScalar { u, v, eps, ctx } => MurQuantity::CIncScalar {
                u: u.clone(),
                v: v.clone(),
                eps: eps.rescaled(sl, sp)?,
                ctx: ctx_of(ctx)?,
            },
            MurQuantity::CIncVector { eps, ctx } => MurQuantity::CIncVector {
                eps: eps.rescaled(sl, sp)?,
                ctx: ctx_of(ctx)?,
            },
        })
    }
}

/// Evaluates `q` before and after the change of units.
pub fn scale_invariance_transport(
    q: &MurQuantity,
    length_scale: f64,
    momentum_scale: f64,
    units: EntropyUnits,
) -> Result<(f64, f64)> {
    if !(length_scale > 0.0 && momentum_scale > 0.0) {
        return Err(Error::input("scales must be positive"));
    }
    let before = q.evaluate(units)?;
    let after = q.rescaled(length_scale, momentum_scale)?.evaluate(units)?;
    Ok((before, after))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, LN_2, LOG2_E};

    const BITS: EntropyUnits = EntropyUnits::Bits;
    const S1_BITS: f64 = (LN_2 - 0.5) * LOG2_E;

    fn ctx(hbar: f64, n: usize) -> PhysContext {
        PhysContext::new(hbar, n).unwrap()
    }

    fn e1(n: usize) -> DVector<f64> {
        DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 })
    }

    fn dir(t: f64) -> DVector<f64> {
        DVector::from_vec(vec![t.cos(), t.sin()])
    }

    fn iso(c: PhysContext, a: f64, b: f64) -> GaussianState {
        make_state_from_blocks(
            SymMatrix::scaled_identity(c.n(), a),
            SymMatrix::scaled_identity(c.n(), b),
            c,
        )
        .unwrap()
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(s_kernel(0.0).unwrap(), 0.0);
        assert!((s_kernel(1.0).unwrap() - 0.19314718).abs() < 1e-8);
        let small = s_kernel(0.001).unwrap();
        assert!((small - 4.99e-7).abs() < 1e-9);
        assert!((small / (0.001f64.powi(2) / 2.0) - 1.0).abs() < 2e-3);
        assert!(matches!(s_kernel(-0.1), Err(Error::Domain(_))));
        let below = s_unchecked(SERIES_CUTOFF.next_down());
        let above = s_unchecked(SERIES_CUTOFF);
        assert!((below / above - 1.0).abs() < 1e-13);
    }

    #[test]
    fn scalar_error_examples() {
        let c = ctx(1.0, 2);
        let rho = iso(c, 0.5, 0.5);
        let (u, v) = (e1(2), dir(FRAC_PI_2));
        let pvm = sharp_projected(&u, &v, c).unwrap();
        assert_eq!(error_function_scalar(&rho, &pvm, BITS).unwrap(), 0.0);

        let c1 = ctx(1.0, 1);
        let rho = iso(c1, 0.5, 0.5);
        let m = ScalarCovariantObservable::trusted(e1(1), e1(1), 0.0, 0.0, 0.5, 0.5, 0.0, c1).unwrap();
        assert!((error_function_scalar(&rho, &m, BITS).unwrap() - S1_BITS).abs() < 1e-15);

        let var_m1: f64 = 0.5 + 0.5;
        let biased = ScalarCovariantObservable::trusted(
            e1(1),
            e1(1),
            var_m1.sqrt(),
            0.0,
            0.5,
            0.5,
            0.0,
            c1,
        )
        .unwrap();
        let diff = error_function_scalar(&rho, &biased, BITS).unwrap()
            - error_function_scalar(&rho, &m, BITS).unwrap();
        assert!((diff - 0.5 * LOG2_E).abs() < 1e-14);
    }

    #[test]
    fn vector_error_examples() {
        let c1 = ctx(1.0, 1);
        let rho = iso(c1, 0.7, 0.9);
        let sigma = iso(c1, 0.4, 1.1);
        let scalar = ScalarCovariantObservable::trusted(e1(1), e1(1), 0.0, 0.0, 0.4, 1.1, 0.0, c1).unwrap();
        let a = error_function_vector(&rho, &from_generating_state(sigma), BITS).unwrap();
        let b = error_function_scalar(&rho, &scalar, BITS).unwrap();
        assert!((a - b).abs() < 1e-14);

        for n in 1..=3 {
            let c = ctx(1.0, n);
            let star = iso(c, 0.5, 0.5);
            let v = error_function_vector(&star, &from_generating_state(star.clone()), BITS).unwrap();
            assert!((v - n as f64 * S1_BITS).abs() < 1e-13);
        }
        assert!((2.0 * S1_BITS - 0.55730).abs() < 1e-5);
    }

    #[test]
    fn state_bound_examples() {
        let c = ctx(1.0, 1);
        let u = e1(1);
        let b = state_dependent_bound_scalar(&iso(c, 0.5, 0.5), &u, &u, BITS).unwrap();
        assert!((b.z_rho - 1.0).abs() < 1e-15 && (b.c_rho - S1_BITS).abs() < 1e-15);
        assert_eq!(b.m_star.noise(), (0.5, 0.5, 0.0));

        let rho = iso(c, 1.0, 1.0);
        let b = state_dependent_bound_scalar(&rho, &u, &u, BITS).unwrap();
        assert!((b.z_rho - 0.5).abs() < 1e-15);
        let want = (1.5f64.ln() - 1.0 / 3.0) * LOG2_E;
        assert!((b.c_rho - want).abs() < 1e-15 && (want - 0.10406).abs() < 1e-5);
        let at = error_function_scalar(&rho, &b.m_star, BITS).unwrap();
        assert!((at - b.c_rho).abs() < 1e-10);

        let c2 = ctx(1.0, 2);
        let v = DVector::from_vec(vec![0.0, 1.0]);
        let b = state_dependent_bound_scalar(&iso(c2, 1.0, 1.0), &e1(2), &v, BITS).unwrap();
        assert_eq!(b.c_rho, 0.0);
    }

    #[test]
    fn divergence_scalar_examples() {
        let c = ctx(1.0, 2);
        let (u, v) = (e1(2), dir(0.5));
        let eps = Thresholds::new(0.8, 0.6).unwrap();
        let m = ScalarCovariantObservable::trusted(u.clone(), v.clone(), 0.0, 0.0, 0.8, 0.6, 0.0, c).unwrap();
        let r = divergence_scalar(&m, &eps, BITS).unwrap();
        assert!(r.is_exact && (r.value - S1_BITS).abs() < 1e-15);
        let worst = r.worst_state.unwrap();
        let at = error_function_scalar(&worst, &m, BITS).unwrap();
        assert!((at - r.value).abs() < 1e-12);

        let pvm = sharp_projected(&u, &DVector::from_vec(vec![0.0, 1.0]), c).unwrap();
        assert_eq!(divergence_scalar(&pvm, &eps, BITS).unwrap().value, 0.0);

        let tiny = Thresholds::new(0.01, 0.01).unwrap();
        let r = divergence_scalar(&m, &tiny, BITS).unwrap();
        assert!(!r.is_exact && r.regime == Regime::BelowQuantumThreshold);
    }

    #[test]
    fn c_inc_scalar_examples() {
        let hbar = 1.3;
        let c = ctx(hbar, 2);
        let t = 0.6f64;
        let (u, v) = (e1(2), dir(t));
        let cos = t.cos();
        let e1v = 0.4;
        let eps = Thresholds::new(e1v, (hbar * cos / 2.0).powi(2) / e1v).unwrap();
        let r = c_inc_scalar(&u, &v, &eps, c, BITS).unwrap();
        assert!(r.is_exact && (r.value - S1_BITS).abs() < 1e-12);

        let eps = Thresholds::new(e1v, (hbar * cos).powi(2) / e1v).unwrap();
        let r = c_inc_scalar(&u, &v, &eps, c, BITS).unwrap();
        assert!((r.value - (1.5f64.ln() - 1.0 / 3.0) * LOG2_E).abs() < 1e-12);
        match r.optimizer.as_ref().unwrap() {
            OptimalMeasurement::Scalar(m) => {
                let d = divergence_scalar(m, &eps, BITS).unwrap();
                assert!((d.value - r.value).abs() < 1e-12);
            }
            _ => panic!("expected a scalar optimizer"),
        }

        let eps = Thresholds::new(0.01, 0.02).unwrap();
        let r = c_inc_scalar(&u, &v, &eps, c, BITS).unwrap();
        assert!(!r.is_exact);
        assert_eq!(r.value, S1_BITS);
        assert!((S1_BITS - (1.0 - LOG2_E / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn divergence_vector_examples() {
        let c = ctx(1.0, 3);
        let eps = Thresholds::new(0.9, 0.7).unwrap();
        let sigma = iso(c, 0.9, 0.7);
        let m = from_generating_state(sigma.clone());
        let r = divergence_vector(&m, &eps, BITS).unwrap();
        assert!((r.value - 3.0 * S1_BITS).abs() < 1e-13);
        let worst = r.worst_state.unwrap();
        let at = error_function_vector(&worst, &m, BITS).unwrap();
        assert!((at - r.value).abs() < 1e-12);

        let shifted = sigma.with_means(DVector::from_element(3, 0.2), DVector::zeros(3)).unwrap();
        let biased = divergence_vector(&from_generating_state(shifted), &eps, BITS).unwrap();
        assert!(biased.value > r.value);
    }

    #[test]
    fn c_inc_vector_examples() {
        let c = ctx(1.0, 1);
        let eps = Thresholds::new(0.5, 0.5).unwrap();
        let r = c_inc_vector(&eps, c, BITS).unwrap();
        assert!((r.value - 0.278652).abs() < 1e-6 && (r.value - S1_BITS).abs() < 1e-15);
        match r.optimizer.as_ref().unwrap() {
            OptimalMeasurement::Vector(m) => {
                assert_eq!(m.sigma().pos_cov(), &SymMatrix::scaled_identity(1, 0.5));
            }
            _ => panic!("expected a vector optimizer"),
        }
        for n in 1..=4 {
            let r = c_inc_vector(&Thresholds::new(0.3, 2.0).unwrap(), ctx(1.0, n), BITS).unwrap();
            let one = c_inc_vector(&Thresholds::new(0.3, 2.0).unwrap(), ctx(1.0, 1), BITS).unwrap();
            assert!((r.value - n as f64 * one.value).abs() < 1e-14);
        }
        let big = c_inc_vector(&Thresholds::new(1e6, 1e6).unwrap(), c, BITS).unwrap();
        assert!(big.value < 1e-12);
    }

    #[test]
    fn report_json_shape() {
        let r = c_inc_vector(&Thresholds::new(0.1, 0.1).unwrap(), ctx(1.0, 1), BITS).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["regime"], "below_quantum_threshold");
        assert_eq!(v["is_exact"], false);
        assert_eq!(v["units"], "bits");
        assert!(v["optimizer"]["J"].is_array());
        assert!(v["worst_state"]["A"].is_array());
    }

    #[test]
    fn transport_examples() {
        let q = MurQuantity::CIncVector {
            eps: Thresholds::new(0.7, 0.4).unwrap(),
            ctx: ctx(1.0, 2),
        };
        let (a, b) = scale_invariance_transport(&q, 1.0, 1.0, BITS).unwrap();
        assert_eq!(a, b);
        let (a, b) = scale_invariance_transport(&q, 2.0, 3.0, BITS).unwrap();
        assert!((a - b).abs() < 1e-14);
    }
}
