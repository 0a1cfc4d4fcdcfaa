//! Gaussian covariant bi-observables, represented by their parameter triple
//! `(μ, V, J)`: on a state with moments `(μ_ρ, V_ρ)` the outcome
//! distribution is `N(J μ_ρ + μ; J V_ρ J^T + V)`.
//!
//! A zero noise matrix is legal (sharp projected measurement when the two
//! directions are orthogonal). The output covariance then equals the
//! projected state covariance, which may fail to be strictly positive for
//! some states; callers needing densities should use the sharp distributions.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::entropy::GaussianDist;
use crate::error::{Error, Result};
use crate::linalg::{herm_psd, matrix_to_rows, rows_to_matrix, HermMatrix, SymMatrix, DEFAULT_PSD_TOL};
use crate::states::{
    check_unit, FailedCondition, GaussianState, PhysContext, StateJson, Validation,
    ValidationFailure,
};

/// A validated triple: `V ± (i/2) J Ω J^T ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBiObservable {
    ctx: PhysContext,
    mu: DVector<f64>,
    noise: SymMatrix,
    jac: DMatrix<f64>,
}

/// Checks the triple and returns either the observable or the failure report.
pub fn validate_biobservable(
    mu: DVector<f64>,
    noise: SymMatrix,
    jac: DMatrix<f64>,
    ctx: PhysContext,
    rel_tol: f64,
) -> Result<Validation<GaussianBiObservable>> {
    let two_m = mu.len();
    if two_m == 0 || two_m % 2 != 0 {
        return Err(Error::input(format!("mean must have even positive length, got {two_m}")));
    }
    if noise.dim() != two_m || jac.shape() != (two_m, 2 * ctx.n()) {
        return Err(Error::input(format!(
            "expected V {two_m}x{two_m} and J {two_m}x{}, got V {}x{} and J {}x{}",
            2 * ctx.n(),
            noise.dim(),
            noise.dim(),
            jac.nrows(),
            jac.ncols()
        )));
    }
    if mu.iter().chain(jac.iter()).any(|x| !x.is_finite()) {
        return Err(Error::input("observable parameters have non-finite entries"));
    }
    let sym = &jac * ctx.omega() * jac.transpose();
    let herm = HermMatrix::from_parts(noise.as_matrix(), &(sym * 0.5))?;
    let verdict = herm_psd(&herm, rel_tol)?;
    if verdict.is_psd {
        Ok(Validation::Valid(GaussianBiObservable { ctx, mu, noise, jac }))
    } else {
        Ok(Validation::Invalid(ValidationFailure {
            min_eigenvalue: verdict.min_eigenvalue,
            tolerance_used: verdict.tolerance_used,
            failed: vec![FailedCondition::ProjectedBound {
                min_eigenvalue: verdict.min_eigenvalue,
            }],
        }))
    }
}

impl GaussianBiObservable {
    pub fn ctx(&self) -> PhysContext {
        self.ctx
    }

    /// Number of outcome pairs.
    pub fn m(&self) -> usize {
        self.mu.len() / 2
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn noise(&self) -> &SymMatrix {
        &self.noise
    }

    pub fn jac(&self) -> &DMatrix<f64> {
        &self.jac
    }

    /// Mean and covariance of the outcome distribution, without requiring
    /// the covariance to be positive definite.
    pub fn output_moments(&self, rho: &GaussianState) -> Result<(DVector<f64>, SymMatrix)> {
        if rho.n() != self.ctx.n() {
            return Err(Error::input(format!(
                "observable acts on n = {} but state has n = {}",
                self.ctx.n(),
                rho.n()
            )));
        }
        let (h1, h2) = (self.ctx.hbar(), rho.hbar());
        if (h1 - h2).abs() > 1e-12 * h1.max(h2) {
            return Err(Error::input(format!("hbar mismatch: observable {h1}, state {h2}")));
        }
        let mean = &self.jac * rho.mean() + &self.mu;
        let cov = rho.variance_matrix().congruence(&self.jac).add(&self.noise);
        Ok((mean, cov))
    }
}

/// Outcome distribution `N(J μ_ρ + μ; J V_ρ J^T + V)`.
pub fn output_distribution(m: &GaussianBiObservable, rho: &GaussianState) -> Result<GaussianDist> {
    let (mean, cov) = m.output_moments(rho)?;
    GaussianDist::new(mean, cov)
}

/// Position-type (first `m` coordinates) and momentum-type (last `m`) marginals.
pub fn marginals(
    m: &GaussianBiObservable,
    rho: &GaussianState,
) -> Result<(GaussianDist, GaussianDist)> {
    let (mean, cov) = m.output_moments(rho)?;
    let k = m.m();
    let c = cov.as_matrix();
    let first = GaussianDist::new(
        mean.rows(0, k).into_owned(),
        SymMatrix::symmetrize(c.view((0, 0), (k, k)).into_owned()),
    )?;
    let second = GaussianDist::new(
        mean.rows(k, k).into_owned(),
        SymMatrix::symmetrize(c.view((k, k), (k, k)).into_owned()),
    )?;
    Ok((first, second))
}

/// `E exp(i(k·X + l·Y))` for the outcome pair `(X, Y)`.
pub fn biobs_char_function(
    m: &GaussianBiObservable,
    rho: &GaussianState,
    k: &DVector<f64>,
    l: &DVector<f64>,
) -> Result<Complex<f64>> {
    let dim = m.m();
    if k.len() != dim || l.len() != dim {
        return Err(Error::input(format!("k and l must have length {dim}")));
    }
    let (mean, cov) = m.output_moments(rho)?;
    let w = DVector::from_fn(2 * dim, |i, _| if i < dim { k[i] } else { l[i - dim] });
    Ok(Complex::from_polar((-0.5 * cov.quad_form(&w)).exp(), w.dot(&mean)))
}

/// Covariant phase-space observable generated by a state `σ`: `μ = μ_σ`,
/// `V = V_σ`, `J = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorCovariantObservable {
    sigma: GaussianState,
}

pub fn from_generating_state(sigma: GaussianState) -> VectorCovariantObservable {
    VectorCovariantObservable { sigma }
}

impl VectorCovariantObservable {
    pub fn sigma(&self) -> &GaussianState {
        &self.sigma
    }

    pub fn ctx(&self) -> PhysContext {
        self.sigma.ctx()
    }

    pub fn to_biobservable(&self) -> Result<GaussianBiObservable> {
        let n2 = 2 * self.sigma.n();
        validate_biobservable(
            self.sigma.mean(),
            self.sigma.variance_matrix(),
            DMatrix::identity(n2, n2),
            self.sigma.ctx(),
            DEFAULT_PSD_TOL,
        )?
        .into_result()
        .map_err(|f| Error::Consistency(format!("generating state gives invalid observable: {f}")))
    }
}

/// `(u, v)`-covariant observable approximating `Q_u` and `P_v` jointly.
///
/// `cos α` is always derived from the stored directions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarCovariantObservable {
    ctx: PhysContext,
    u: DVector<f64>,
    v: DVector<f64>,
    a_m: f64,
    b_m: f64,
    v11: f64,
    v22: f64,
    v12: f64,
}

/// `[[u^T, 0], [0, v^T]]`.
pub fn scalar_jacobian(u: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    let n = u.len();
    DMatrix::from_fn(2, 2 * n, |i, j| match (i, j < n) {
        (0, true) => u[j],
        (1, false) => v[j - n],
        _ => 0.0,
    })
}

/// Direct form of the scalar positivity condition:
/// `V11, V22 ≥ 0` and `V11 V22 ≥ (ħ cos α / 2)² + V12²`.
pub fn scalar_positivity_direct(
    v11: f64,
    v22: f64,
    v12: f64,
    hbar: f64,
    cos_alpha: f64,
    rel_tol: f64,
) -> bool {
    let scale = v11.abs().max(v22.abs()).max(1.0);
    let tol = rel_tol * scale;
    let slack = v11 * v22 - (hbar * cos_alpha / 2.0).powi(2) - v12 * v12;
    v11 >= -tol && v22 >= -tol && slack >= -tol * scale
}

impl ScalarCovariantObservable {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        u: DVector<f64>,
        v: DVector<f64>,
        a_m: f64,
        b_m: f64,
        v11: f64,
        v22: f64,
        v12: f64,
        ctx: PhysContext,
    ) -> Result<Validation<ScalarCovariantObservable>> {
        let n = ctx.n();
        check_unit(&u, n, "direction u")?;
        check_unit(&v, n, "direction v")?;
        if ![a_m, b_m, v11, v22, v12].iter().all(|x| x.is_finite()) {
            return Err(Error::input("observable parameters must be finite"));
        }
        let noise = SymMatrix::symmetrize(DMatrix::from_row_slice(2, 2, &[v11, v12, v12, v22]));
        let check = validate_biobservable(
            DVector::from_vec(vec![a_m, b_m]),
            noise,
            scalar_jacobian(&u, &v),
            ctx,
            DEFAULT_PSD_TOL,
        )?;
        Ok(match check {
            Validation::Valid(_) => Validation::Valid(ScalarCovariantObservable {
                ctx,
                u,
                v,
                a_m,
                b_m,
                v11,
                v22,
                v12,
            }),
            Validation::Invalid(f) => Validation::Invalid(f),
        })
    }

    /// Constructor for parameters that are valid by construction.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn trusted(
        u: DVector<f64>,
        v: DVector<f64>,
        a_m: f64,
        b_m: f64,
        v11: f64,
        v22: f64,
        v12: f64,
        ctx: PhysContext,
    ) -> Result<ScalarCovariantObservable> {
        ScalarCovariantObservable::new(u, v, a_m, b_m, v11, v22, v12, ctx)?
            .into_result()
            .map_err(|f| Error::Consistency(format!("constructed observable is invalid: {f}")))
    }

    pub fn ctx(&self) -> PhysContext {
        self.ctx
    }

    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn cos_alpha(&self) -> f64 {
        self.u.dot(&self.v)
    }

    pub fn bias(&self) -> (f64, f64) {
        (self.a_m, self.b_m)
    }

    /// `(V11, V22, V12)`.
    pub fn noise(&self) -> (f64, f64, f64) {
        (self.v11, self.v22, self.v12)
    }

    pub fn to_biobservable(&self) -> Result<GaussianBiObservable> {
        let noise = SymMatrix::symmetrize(DMatrix::from_row_slice(
            2,
            2,
            &[self.v11, self.v12, self.v12, self.v22],
        ));
        validate_biobservable(
            DVector::from_vec(vec![self.a_m, self.b_m]),
            noise,
            scalar_jacobian(&self.u, &self.v),
            self.ctx,
            DEFAULT_PSD_TOL,
        )?
        .into_result()
        .map_err(|f| Error::Consistency(format!("stored observable is invalid: {f}")))
    }

    /// Same observable in rescaled units (`ħ' = s_L s_P ħ`).
    pub fn rescaled(&self, length_scale: f64, momentum_scale: f64) -> Result<Self> {
        let ctx = PhysContext::new(
            self.ctx.hbar() * length_scale * momentum_scale,
            self.ctx.n(),
        )?;
        ScalarCovariantObservable::trusted(
            self.u.clone(),
            self.v.clone(),
            self.a_m * length_scale,
            self.b_m * momentum_scale,
            self.v11 * length_scale * length_scale,
            self.v22 * momentum_scale * momentum_scale,
            self.v12 * length_scale * momentum_scale,
            ctx,
        )
    }
}

/// Noisy position measurement along `u` with variance `Δ` followed by a sharp
/// momentum measurement along `v`: `V11 = Δ`, `V22 = (ħ cos α)² / 4Δ`, `V12 = 0`.
pub fn noisy_position_then_momentum(
    delta: f64,
    u: &DVector<f64>,
    v: &DVector<f64>,
    ctx: PhysContext,
) -> Result<ScalarCovariantObservable> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::input(format!("Delta must be positive and finite, got {delta}")));
    }
    let cos = u.dot(v);
    let v22 = (ctx.hbar() * cos).powi(2) / (4.0 * delta);
    ScalarCovariantObservable::trusted(u.clone(), v.clone(), 0.0, 0.0, delta, v22, 0.0, ctx)
}

/// Sharp projected measurement for orthogonal `u ⊥ v`: all noise parameters zero.
pub fn sharp_projected(
    u: &DVector<f64>,
    v: &DVector<f64>,
    ctx: PhysContext,
) -> Result<ScalarCovariantObservable> {
    ScalarCovariantObservable::trusted(u.clone(), v.clone(), 0.0, 0.0, 0.0, 0.0, 0.0, ctx)
}

fn default_hbar() -> f64 {
    1.0
}

/// JSON form of a general triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiObservableJson {
    pub mu: Vec<f64>,
    #[serde(rename = "V")]
    pub noise: Vec<Vec<f64>>,
    #[serde(rename = "J")]
    pub jac: Vec<Vec<f64>>,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
}

impl BiObservableJson {
    pub fn validate(&self, rel_tol: f64) -> Result<Validation<GaussianBiObservable>> {
        let jac = rows_to_matrix(&self.jac, "J")?;
        if jac.ncols() % 2 != 0 {
            return Err(Error::input("J must have an even number of columns"));
        }
        let ctx = PhysContext::new(self.hbar, jac.ncols() / 2)?;
        let noise = SymMatrix::new(rows_to_matrix(&self.noise, "V")?)?;
        validate_biobservable(DVector::from_vec(self.mu.clone()), noise, jac, ctx, rel_tol)
    }
}

impl From<&GaussianBiObservable> for BiObservableJson {
    fn from(m: &GaussianBiObservable) -> Self {
        BiObservableJson {
            mu: m.mu.iter().copied().collect(),
            noise: m.noise.to_rows(),
            jac: matrix_to_rows(&m.jac),
            hbar: m.ctx.hbar(),
        }
    }
}

impl From<&VectorCovariantObservable> for BiObservableJson {
    fn from(m: &VectorCovariantObservable) -> Self {
        let n2 = 2 * m.sigma.n();
        BiObservableJson {
            mu: m.sigma.mean().iter().copied().collect(),
            noise: m.sigma.variance_matrix().to_rows(),
            jac: matrix_to_rows(&DMatrix::identity(n2, n2)),
            hbar: m.sigma.hbar(),
        }
    }
}

/// JSON shorthand for the scalar case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarObservableJson {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "V11")]
    pub v11: f64,
    #[serde(rename = "V22")]
    pub v22: f64,
    #[serde(rename = "V12")]
    pub v12: f64,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
}

impl ScalarObservableJson {
    pub fn validate(&self) -> Result<Validation<ScalarCovariantObservable>> {
        if self.u.len() != self.v.len() {
            return Err(Error::input("u and v must have the same length"));
        }
        let ctx = PhysContext::new(self.hbar, self.u.len())?;
        ScalarCovariantObservable::new(
            DVector::from_vec(self.u.clone()),
            DVector::from_vec(self.v.clone()),
            self.a,
            self.b,
            self.v11,
            self.v22,
            self.v12,
            ctx,
        )
    }
}

impl From<&ScalarCovariantObservable> for ScalarObservableJson {
    fn from(m: &ScalarCovariantObservable) -> Self {
        ScalarObservableJson {
            u: m.u.iter().copied().collect(),
            v: m.v.iter().copied().collect(),
            a: m.a_m,
            b: m.b_m,
            v11: m.v11,
            v22: m.v22,
            v12: m.v12,
            hbar: m.ctx.hbar(),
        }
    }
}

/// Anything the command line can read: a state, a triple or the scalar shorthand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputJson {
    State(StateJson),
    Scalar(ScalarObservableJson),
    Triple(BiObservableJson),
}
