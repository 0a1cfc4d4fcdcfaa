//! Gaussian states described by their first and second moments.
//!
//! A state on `n` degrees of freedom is the mean vector `(a; b)` together with
//! the quantum variance matrix `V = [[A, C], [C^T, B]]`. Physical states are
//! exactly those with `V + (i/2) Ω ⪰ 0`, where `Ω = [[0, ħ1], [-ħ1, 0]]`.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, herm_psd, matrix_to_rows, rows_to_matrix, HermMatrix, SymMatrix, DEFAULT_PSD_TOL,
};

/// Below this distance from 0 or ±1, `cos α` selects the degenerate constructions.
pub const DEGENERATE_COS_TOL: f64 = 1e-12;

/// Relative tolerance for the determinant identities (purity, minimum uncertainty).
pub const DET_REL_TOL: f64 = 1e-9;

/// Physical constants shared by a state and everything measured on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysContext {
    hbar: f64,
    n: usize,
}

impl PhysContext {
    pub fn new(hbar: f64, n: usize) -> Result<Self> {
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::input(format!("hbar must be positive and finite, got {hbar}")));
        }
        if n == 0 {
            return Err(Error::input("number of degrees of freedom must be at least 1"));
        }
        Ok(PhysContext { hbar, n })
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The symplectic form `[[0, ħ1], [-ħ1, 0]]`.
    pub fn omega(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            if j == i + n {
                self.hbar
            } else if i == j + n {
                -self.hbar
            } else {
                0.0
            }
        })
    }

    /// `(ħ/2)^{2n}`, the determinant of the variance matrix of a pure state.
    pub fn pure_det(&self) -> f64 {
        (self.hbar / 2.0).powi(2 * self.n as i32)
    }
}

/// Either a validated value or the reason the candidate was rejected.
///
/// Rejection is an ordinary data outcome, not an error.
#[derive(Debug, Clone)]
pub enum Validation<T> {
    Valid(T),
    Invalid(ValidationFailure),
}

impl<T> Validation<T> {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validation::Valid(_))
    }

    pub fn valid(self) -> Option<T> {
        match self {
            Validation::Valid(t) => Some(t),
            Validation::Invalid(_) => None,
        }
    }

    pub fn into_result(self) -> std::result::Result<T, ValidationFailure> {
        match self {
            Validation::Valid(t) => Ok(t),
            Validation::Invalid(f) => Err(f),
        }
    }
}

/// A derived condition that a rejected candidate fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum FailedCondition {
    /// `A ≻ 0` fails.
    PositionBlockNotPositive { min_eigenvalue: f64 },
    /// `B ≻ 0` fails.
    MomentumBlockNotPositive { min_eigenvalue: f64 },
    /// `B ⪰ (C^T - iħ/2) A^{-1} (C + iħ/2)` fails.
    SchurComplementBound { min_eigenvalue: f64 },
    /// The Robertson-type bound on a 2×2 projected matrix fails.
    ProjectedBound { min_eigenvalue: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationFailure {
    /// Smallest eigenvalue of `V + (i/2) J Ω J^T`.
    pub min_eigenvalue: f64,
    pub tolerance_used: f64,
    pub failed: Vec<FailedCondition>,
}

impl std::fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "positivity violated: min eigenvalue {:e} below tolerance -{:e}",
            self.min_eigenvalue, self.tolerance_used
        )?;
        for c in &self.failed {
            write!(f, "; {c:?}")?;
        }
        Ok(())
    }
}

/// A Gaussian state: means `a` (length), `b` (momentum) and variance blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    ctx: PhysContext,
    a: DVector<f64>,
    b: DVector<f64>,
    pos_cov: SymMatrix,
    mom_cov: SymMatrix,
    cross_cov: DMatrix<f64>,
}

fn check_vec(v: &DVector<f64>, n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::input(format!("{what} has length {}, expected {n}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::input(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// Builds `V + (i/2) Ω` from the real variance matrix.
fn v_plus(v: &DMatrix<f64>, omega: &DMatrix<f64>) -> Result<HermMatrix> {
    HermMatrix::from_parts(v, &(omega * 0.5))
}

fn block_matrix(a: &SymMatrix, b: &SymMatrix, c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.dim();
    let mut v = DMatrix::zeros(2 * n, 2 * n);
    v.view_mut((0, 0), (n, n)).copy_from(a.as_matrix());
    v.view_mut((n, n), (n, n)).copy_from(b.as_matrix());
    v.view_mut((0, n), (n, n)).copy_from(c);
    v.view_mut((n, 0), (n, n)).copy_from(&c.transpose());
    v
}

/// Validates a candidate state at the default tolerance.
pub fn validate_state(
    a: DVector<f64>,
    b: DVector<f64>,
    pos_cov: SymMatrix,
    mom_cov: SymMatrix,
    cross_cov: DMatrix<f64>,
    ctx: PhysContext,
) -> Result<Validation<GaussianState>> {
    validate_state_with_tol(a, b, pos_cov, mom_cov, cross_cov, ctx, DEFAULT_PSD_TOL)
}

/// Accepts iff `V + (i/2) Ω ⪰ 0` at relative tolerance `rel_tol` and both
/// diagonal blocks are strictly positive definite.
pub fn validate_state_with_tol(
    a: DVector<f64>,
    b: DVector<f64>,
    pos_cov: SymMatrix,
    mom_cov: SymMatrix,
    cross_cov: DMatrix<f64>,
    ctx: PhysContext,
    rel_tol: f64,
) -> Result<Validation<GaussianState>> {
    let n = ctx.n();
    check_vec(&a, n, "position mean")?;
    check_vec(&b, n, "momentum mean")?;
    if pos_cov.dim() != n || mom_cov.dim() != n || cross_cov.shape() != (n, n) {
        return Err(Error::input(format!(
            "variance blocks must be {n}x{n}, got A {0}x{0}, B {1}x{1}, C {2}x{3}",
            pos_cov.dim(),
            mom_cov.dim(),
            cross_cov.nrows(),
            cross_cov.ncols()
        )));
    }
    if cross_cov.iter().any(|x| !x.is_finite()) {
        return Err(Error::input("cross covariance has non-finite entries"));
    }

    let v = block_matrix(&pos_cov, &mom_cov, &cross_cov);
    let verdict = herm_psd(&v_plus(&v, &ctx.omega())?, rel_tol)?;

    let a_min = pos_cov.min_eigenvalue()?;
    let b_min = mom_cov.min_eigenvalue()?;
    let mut failed = Vec::new();
    if !(a_min > 0.0) {
        failed.push(FailedCondition::PositionBlockNotPositive { min_eigenvalue: a_min });
    }
    if !(b_min > 0.0) {
        failed.push(FailedCondition::MomentumBlockNotPositive { min_eigenvalue: b_min });
    }

    if verdict.is_psd && failed.is_empty() {
        return Ok(Validation::Valid(GaussianState {
            ctx,
            a,
            b,
            pos_cov,
            mom_cov,
            cross_cov,
        }));
    }

    if a_min > 0.0 {
        let m = schur_bound_matrix(&pos_cov, &mom_cov, &cross_cov, ctx.hbar())?;
        let lo = m.eigenvalues()?[0];
        if lo < -verdict.tolerance_used {
            failed.push(FailedCondition::SchurComplementBound { min_eigenvalue: lo });
        }
    }
    Ok(Validation::Invalid(ValidationFailure {
        min_eigenvalue: verdict.min_eigenvalue,
        tolerance_used: verdict.tolerance_used,
        failed,
    }))
}

/// `B - (C^T - iħ/2) A^{-1} (C + iħ/2)`, which is PSD iff the state is valid (given `A ≻ 0`).
fn schur_bound_matrix(
    pos_cov: &SymMatrix,
    mom_cov: &SymMatrix,
    cross_cov: &DMatrix<f64>,
    hbar: f64,
) -> Result<HermMatrix> {
    let n = pos_cov.dim();
    let ainv = pos_cov.inverse()?.into_matrix().map(|x| Complex::new(x, 0.0));
    let shift = DMatrix::<Complex<f64>>::identity(n, n) * Complex::new(0.0, hbar / 2.0);
    let c = cross_cov.map(|x| Complex::new(x, 0.0));
    let left = c.transpose() - &shift;
    let right = &c + &shift;
    let bound = left * ainv * right;
    let b = mom_cov.as_matrix().map(|x| Complex::new(x, 0.0));
    HermMatrix::new(b - bound)
}

impl GaussianState {
    pub fn ctx(&self) -> PhysContext {
        self.ctx
    }

    pub fn n(&self) -> usize {
        self.ctx.n()
    }

    pub fn hbar(&self) -> f64 {
        self.ctx.hbar()
    }

    /// Position mean `a`.
    pub fn pos_mean(&self) -> &DVector<f64> {
        &self.a
    }

    /// Momentum mean `b`.
    pub fn mom_mean(&self) -> &DVector<f64> {
        &self.b
    }

    /// Position variance block `A`.
    pub fn pos_cov(&self) -> &SymMatrix {
        &self.pos_cov
    }

    /// Momentum variance block `B`.
    pub fn mom_cov(&self) -> &SymMatrix {
        &self.mom_cov
    }

    /// Mixed block `C` (not necessarily symmetric).
    pub fn cross_cov(&self) -> &DMatrix<f64> {
        &self.cross_cov
    }

    /// `μ = (a; b)`.
    pub fn mean(&self) -> DVector<f64> {
        let n = self.n();
        DVector::from_fn(2 * n, |i, _| if i < n { self.a[i] } else { self.b[i - n] })
    }

    /// The full `2n × 2n` quantum variance matrix.
    pub fn variance_matrix(&self) -> SymMatrix {
        SymMatrix::symmetrize(block_matrix(&self.pos_cov, &self.mom_cov, &self.cross_cov))
    }

    /// `V + (i/2) Ω`.
    pub fn v_plus(&self) -> Result<HermMatrix> {
        v_plus(self.variance_matrix().as_matrix(), &self.ctx.omega())
    }

    /// `V - (i/2) Ω`.
    pub fn v_minus(&self) -> Result<HermMatrix> {
        v_plus(self.variance_matrix().as_matrix(), &(-self.ctx.omega()))
    }

    /// Same state with the means replaced.
    pub fn with_means(&self, a: DVector<f64>, b: DVector<f64>) -> Result<GaussianState> {
        check_vec(&a, self.n(), "position mean")?;
        check_vec(&b, self.n(), "momentum mean")?;
        Ok(GaussianState { a, b, ..self.clone() })
    }

    /// Builds a state that is already known to be valid by construction.
    pub(crate) fn from_trusted_parts(
        ctx: PhysContext,
        a: DVector<f64>,
        b: DVector<f64>,
        pos_cov: SymMatrix,
        mom_cov: SymMatrix,
        cross_cov: DMatrix<f64>,
    ) -> Result<GaussianState> {
        validate_state(a, b, pos_cov, mom_cov, cross_cov, ctx)?
            .into_result()
            .map_err(|f| Error::Consistency(format!("constructed state failed validation: {f}")))
    }
}

/// Means and variances of `Q_u` and `P_v` in a given state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarMoments {
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
    /// `u · C v`.
    pub cov_qp: f64,
    /// `u · v`.
    pub cos_alpha: f64,
}

impl ScalarMoments {
    /// The 2×2 matrix `[[var_q, cov_qp], [cov_qp, var_p]]`.
    pub fn variance_matrix(&self) -> SymMatrix {
        SymMatrix::symmetrize(DMatrix::from_row_slice(
            2,
            2,
            &[self.var_q, self.cov_qp, self.cov_qp, self.var_p],
        ))
    }
}

pub(crate) fn check_unit(v: &DVector<f64>, n: usize, what: &str) -> Result<()> {
    check_vec(v, n, what)?;
    let norm = v.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::input(format!("{what} must be a unit vector, has norm {norm}")));
    }
    Ok(())
}

/// Projects a state onto position along `u` and momentum along `v`.
pub fn scalar_moments(
    state: &GaussianState,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<ScalarMoments> {
    let n = state.n();
    check_unit(u, n, "direction u")?;
    check_unit(v, n, "direction v")?;
    Ok(ScalarMoments {
        mean_q: u.dot(&state.a),
        mean_p: v.dot(&state.b),
        var_q: state.pos_cov.quad_form(u),
        var_p: state.mom_cov.quad_form(v),
        cov_qp: u.dot(&(&state.cross_cov * v)),
        cos_alpha: u.dot(v),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PurityInfo {
    pub det_v: f64,
    pub is_pure: bool,
    pub is_min_uncertainty: bool,
}

/// Purity (`det V = (ħ/2)^{2n}`) and minimum uncertainty (`det A det B = (ħ/2)^{2n}`).
pub fn purity_info(state: &GaussianState) -> Result<PurityInfo> {
    let target = state.ctx.pure_det();
    let det_v = linalg::det(&state.variance_matrix())?;
    let det_ab = linalg::det(&state.pos_cov)? * linalg::det(&state.mom_cov)?;
    let tol = DET_REL_TOL * target;
    let is_pure = (det_v - target).abs() <= tol;
    let is_min_uncertainty = (det_ab - target).abs() <= tol;
    if is_min_uncertainty && !is_pure {
        return Err(Error::Consistency(format!(
            "det A det B = {det_ab:e} saturates the bound but det V = {det_v:e} does not"
        )));
    }
    Ok(PurityInfo {
        det_v,
        is_pure,
        is_min_uncertainty,
    })
}

/// State with `C = 0`, zero means and the given diagonal blocks; requires
/// `B ⪰ (ħ²/4) A^{-1}`.
pub fn make_state_from_blocks(
    pos_cov: SymMatrix,
    mom_cov: SymMatrix,
    ctx: PhysContext,
) -> Result<GaussianState> {
    let n = ctx.n();
    if pos_cov.dim() != n || mom_cov.dim() != n {
        return Err(Error::input(format!("blocks must be {n}x{n}")));
    }
    let a_min = pos_cov.min_eigenvalue()?;
    if !(a_min > 0.0) {
        return Err(Error::domain(format!(
            "position block is not positive definite (min eigenvalue {a_min:e})"
        )));
    }
    let gap = mom_cov.sub(&pos_cov.inverse()?.scale(ctx.hbar() * ctx.hbar() / 4.0));
    let gap_min = gap.min_eigenvalue()?;
    let scale = mom_cov.max_abs().max(1.0);
    if gap_min < -DEFAULT_PSD_TOL * scale {
        return Err(Error::domain(format!(
            "B - (hbar^2/4) A^-1 has min eigenvalue {gap_min:e}"
        )));
    }
    GaussianState::from_trusted_parts(
        ctx,
        DVector::zeros(n),
        DVector::zeros(n),
        pos_cov,
        mom_cov,
        DMatrix::zeros(n, n),
    )
}

/// Orthonormal basis `(u, w)` of `span{u, v}` plus the projector onto its complement.
fn span_basis(u: &DVector<f64>, v: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = u.len();
    let w = v - u * u.dot(v);
    let w = w.normalize();
    let proj = DMatrix::identity(n, n) - u * u.transpose() - &w * w.transpose();
    (w, proj)
}

/// A state whose projected variances along `u` and `v` are exactly `c_q` and
/// `c_p`. Needs `c_q c_p ≥ (ħ cos α / 2)²`.
///
/// Three constructions, selected by `cos α = u·v`:
/// * `|cos α| = 1`: `A = c_q 1`, `B = c_p 1`.
/// * `cos α = 0`: saturating rank-one blocks on `u` and `v`.
/// * otherwise: `A` with `u·Au = c_q` and `Au ∝ v`, `B = (c_q c_p / cos²α) A^{-1}` on `span{u, v}`.
///
/// On the orthogonal complement of `span{u, v}` the blocks are `c_q P⊥` and
/// `(ħ² / 4 c_q) P⊥`.
pub fn make_state_with_scalar_variances(
    c_q: f64,
    c_p: f64,
    u: &DVector<f64>,
    v: &DVector<f64>,
    ctx: PhysContext,
) -> Result<GaussianState> {
    let n = ctx.n();
    check_unit(u, n, "direction u")?;
    check_unit(v, n, "direction v")?;
    if !(c_q > 0.0 && c_p > 0.0) || !c_q.is_finite() || !c_p.is_finite() {
        return Err(Error::input("scalar variances must be positive and finite"));
    }
    let hbar = ctx.hbar();
    let cos = u.dot(v).clamp(-1.0, 1.0);
    let bound = (hbar * cos / 2.0).powi(2);
    if c_q * c_p < bound * (1.0 - DEFAULT_PSD_TOL) {
        return Err(Error::domain(format!(
            "variance product {:e} below the Robertson bound {bound:e}",
            c_q * c_p
        )));
    }

    let (pos_cov, mom_cov) = if (cos.abs() - 1.0).abs() <= DEGENERATE_COS_TOL {
        (SymMatrix::scaled_identity(n, c_q), SymMatrix::scaled_identity(n, c_p))
    } else {
        let (w, perp) = span_basis(u, v);
        let pad_a = &perp * c_q;
        let pad_b = &perp * (hbar * hbar / (4.0 * c_q));
        let uu = u * u.transpose();
        if cos.abs() <= DEGENERATE_COS_TOL {
            let ww = &w * w.transpose();
            let a = &uu * c_q + &ww * (hbar * hbar / (4.0 * c_p)) + pad_a;
            let b = &uu * (hbar * hbar / (4.0 * c_q)) + &ww * c_p + pad_b;
            (SymMatrix::symmetrize(a), SymMatrix::symmetrize(b))
        } else {
            // In the basis (u, w): A = c_q [[1, t], [t, 1/cos²]] with t = tan α, so A u ∝ v
            // and det A = c_q² stays away from zero as |cos α| → 1.
            let sec2 = 1.0 / (cos * cos);
            let tan = w.dot(v) / cos;
            let uw = u * w.transpose() + &w * u.transpose();
            let ww = &w * w.transpose();
            let a = (&uu + &uw * tan + &ww * sec2) * c_q + pad_a;
            let b = (&uu * sec2 - &uw * tan + &ww) * (c_p * sec2) + pad_b;
            (SymMatrix::symmetrize(a), SymMatrix::symmetrize(b))
        }
    };
    GaussianState::from_trusted_parts(
        ctx,
        DVector::zeros(n),
        DVector::zeros(n),
        pos_cov,
        mom_cov,
        DMatrix::zeros(n, n),
    )
}

/// Characteristic function `exp(i w·μ - ½ w·V w)` at `w = (k; l)`.
pub fn char_function(
    state: &GaussianState,
    k: &DVector<f64>,
    l: &DVector<f64>,
) -> Result<Complex<f64>> {
    let n = state.n();
    check_vec(k, n, "k")?;
    check_vec(l, n, "l")?;
    let phase = k.dot(&state.a) + l.dot(&state.b);
    let quad = 0.5 * (state.pos_cov.quad_form(k) + state.mom_cov.quad_form(l))
        + k.dot(&(&state.cross_cov * l));
    Ok(Complex::from_polar((-quad).exp(), phase))
}

/// Change of units: lengths by `length_scale`, momenta by `momentum_scale`.
/// The returned state carries `ħ' = length_scale · momentum_scale · ħ`.
pub fn rescale(
    state: &GaussianState,
    length_scale: f64,
    momentum_scale: f64,
) -> Result<GaussianState> {
    if !(length_scale > 0.0 && momentum_scale > 0.0)
        || !length_scale.is_finite()
        || !momentum_scale.is_finite()
    {
        return Err(Error::input("scales must be positive and finite"));
    }
    let ctx = PhysContext::new(state.hbar() * length_scale * momentum_scale, state.n())?;
    Ok(GaussianState {
        ctx,
        a: &state.a * length_scale,
        b: &state.b * momentum_scale,
        pos_cov: state.pos_cov.scale(length_scale * length_scale),
        mom_cov: state.mom_cov.scale(momentum_scale * momentum_scale),
        cross_cov: &state.cross_cov * (length_scale * momentum_scale),
    })
}

/// Draws a random valid state as `V = S D S^T` with `S` symplectic and
/// `D = diag(ν, ν)`, `ν_i ≥ ħ/2`. Means are standard normal.
///
/// `mixedness` bounds the excess `ν_i / (ħ/2) - 1`; zero gives a pure state.
pub fn random_state<R: rand::Rng + ?Sized>(
    ctx: PhysContext,
    mixedness: f64,
    rng: &mut R,
) -> Result<GaussianState> {
    use rand_distr::{Distribution, StandardNormal};
    let n = ctx.n();
    let hbar = ctx.hbar();
    let nu: Vec<f64> = (0..n)
        .map(|_| hbar / 2.0 * (1.0 + mixedness * rng.random::<f64>()))
        .collect();
    let mut gauss = |scale: f64| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        z * scale
    };
    let x = DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |_, _| gauss(0.3));
    let xinv_t = x
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::domain("random symplectic factor is singular"))?
        .transpose();
    let y1 = DMatrix::from_fn(n, n, |_, _| gauss(0.3));
    let y1 = (&y1 + y1.transpose()) * 0.5;
    let y2 = DMatrix::from_fn(n, n, |_, _| gauss(0.3));
    let y2 = (&y2 + y2.transpose()) * 0.5;
    let log_scale = DVector::from_fn(n, |_, _| gauss(0.5));

    let mut s = DMatrix::zeros(2 * n, 2 * n);
    s.view_mut((0, 0), (n, n)).copy_from(&x);
    s.view_mut((n, n), (n, n)).copy_from(&xinv_t);
    let mut lower = DMatrix::identity(2 * n, 2 * n);
    lower.view_mut((n, 0), (n, n)).copy_from(&y1);
    let mut upper = DMatrix::identity(2 * n, 2 * n);
    upper.view_mut((0, n), (n, n)).copy_from(&y2);
    // Squeeze: position by e^{t}, momentum by e^{-t}.
    let squeeze = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i != j {
            0.0
        } else if i < n {
            log_scale[i].exp()
        } else {
            (-log_scale[i - n]).exp()
        }
    });
    let s = squeeze * s * lower * upper;
    let d = DMatrix::from_fn(2 * n, 2 * n, |i, j| if i == j { nu[i % n] } else { 0.0 });
    let v = &s * d * s.transpose();

    let pos = SymMatrix::symmetrize(v.view((0, 0), (n, n)).into_owned());
    let mom = SymMatrix::symmetrize(v.view((n, n), (n, n)).into_owned());
    let cross = v.view((0, n), (n, n)).into_owned();
    let a = DVector::from_fn(n, |_, _| gauss(1.0));
    let b = DVector::from_fn(n, |_, _| gauss(1.0));
    GaussianState::from_trusted_parts(ctx, a, b, pos, mom, cross)
}

/// JSON form of a state: row-major matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub hbar: f64,
    pub n: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(rename = "A")]
    pub pos_cov: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub mom_cov: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub cross_cov: Vec<Vec<f64>>,
}

impl From<&GaussianState> for StateJson {
    fn from(s: &GaussianState) -> Self {
        StateJson {
            hbar: s.hbar(),
            n: s.n(),
            a: s.a.iter().copied().collect(),
            b: s.b.iter().copied().collect(),
            pos_cov: s.pos_cov.to_rows(),
            mom_cov: s.mom_cov.to_rows(),
            cross_cov: matrix_to_rows(&s.cross_cov),
        }
    }
}

impl StateJson {
    /// Parses the blocks and runs full validation.
    pub fn validate(&self, rel_tol: f64) -> Result<Validation<GaussianState>> {
        let ctx = PhysContext::new(self.hbar, self.n)?;
        let pos = SymMatrix::new(rows_to_matrix(&self.pos_cov, "A")?)?;
        let mom = SymMatrix::new(rows_to_matrix(&self.mom_cov, "B")?)?;
        let cross = rows_to_matrix(&self.cross_cov, "C")?;
        validate_state_with_tol(
            DVector::from_vec(self.a.clone()),
            DVector::from_vec(self.b.clone()),
            pos,
            mom,
            cross,
            ctx,
            rel_tol,
        )
    }
}
