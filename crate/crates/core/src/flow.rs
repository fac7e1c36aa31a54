//! The controller: a primal-dual gradient flow on the condensed problem,
//! driven continuously by the measured plant state.
//!
//! ```text
//! ż = -∇f(z) - ∇g(z) μ - K Hᵀ (λ + β λ̇)
//! μ̇ = [g(z)]⁺_μ
//! λ̇ = (1 + αβ)⁻¹ (H z + V x - α λ)
//! u  = E z
//! ```
//!
//! with `K = 1 + 2αβ`. The `λ̇` equation is explicit, so it is evaluated first
//! and fed into the primal update.

use crate::error::{invalid, mismatch, Error, Result};
use crate::numerics::{vec_norm_inf, DenseMatrix, DenseVector, LuFactor};
use crate::problem::MpcProblem;

/// Design parameters of the flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl FlowParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Self::with_gamma(alpha, beta, 0.0)
    }

    pub fn with_gamma(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("α must be positive, got {alpha}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(invalid(format!("β must be nonnegative, got {beta}")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(invalid(format!("γ must be nonnegative, got {gamma}")));
        }
        Ok(Self { alpha, beta, gamma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `K = 1 + 2αβ`
    pub fn k(&self) -> f64 {
        1.0 + 2.0 * self.alpha * self.beta
    }

    /// `1 + αβ`
    pub fn damping(&self) -> f64 {
        1.0 + self.alpha * self.beta
    }
}

/// Dynamic state of the controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub z: DenseVector,
    pub mu: DenseVector,
    pub lambda: DenseVector,
}

impl ControllerState {
    pub fn zeros(prob: &MpcProblem) -> Self {
        Self {
            z: DenseVector::zeros(prob.nz()),
            mu: DenseVector::zeros(prob.n_ineq()),
            lambda: DenseVector::zeros(prob.n_eq()),
        }
    }

    pub fn check(&self, prob: &MpcProblem) -> Result<()> {
        if self.z.len() != prob.nz() || self.mu.len() != prob.n_ineq() || self.lambda.len() != prob.n_eq() {
            return Err(mismatch(format!(
                "controller state (z {}, μ {}, λ {}) does not match problem (z {}, μ {}, λ {})",
                self.z.len(),
                self.mu.len(),
                self.lambda.len(),
                prob.nz(),
                prob.n_ineq(),
                prob.n_eq()
            )));
        }
        let finite = |v: &DenseVector| v.iter().all(|x| x.is_finite());
        if !(finite(&self.z) && finite(&self.mu) && finite(&self.lambda)) {
            return Err(Error::NonFinite("controller state"));
        }
        Ok(())
    }
}

/// Time derivative of a [`ControllerState`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowDerivative {
    pub z: DenseVector,
    pub mu: DenseVector,
    pub lambda: DenseVector,
}

impl FlowDerivative {
    pub fn norm_inf(&self) -> f64 {
        vec_norm_inf(&self.z)
            .max(vec_norm_inf(&self.mu))
            .max(vec_norm_inf(&self.lambda))
    }
}

/// `[σ]⁺_ε`: `σ` when `ε > 0`, `max(0, σ)` when `ε = 0`.
pub fn pos_projection(sigma: f64, eps: f64) -> Result<f64> {
    if eps < 0.0 {
        return Err(invalid(format!("projection anchor must be nonnegative, got {eps}")));
    }
    Ok(project_scalar(sigma, eps))
}

#[inline]
fn project_scalar(sigma: f64, eps: f64) -> f64 {
    if eps > 0.0 {
        sigma
    } else {
        sigma.max(0.0)
    }
}

fn project_vec(sigma: &DenseVector, eps: &DenseVector) -> DenseVector {
    sigma.zip_map(eps, project_scalar)
}

fn check_inputs(state: &ControllerState, x: &DenseVector, prob: &MpcProblem) -> Result<()> {
    state.check(prob)?;
    prob.check_state(x)?;
    if state.mu.iter().any(|&m| m < 0.0) {
        return Err(invalid("μ must be nonnegative"));
    }
    Ok(())
}

/// Evaluate the flow at `(state, x)`.
pub fn flow_rhs(
    state: &ControllerState,
    x: &DenseVector,
    prob: &MpcProblem,
    params: &FlowParams,
) -> Result<FlowDerivative> {
    check_inputs(state, x, prob)?;
    let d = flow_rhs_unchecked(&state.z, &state.mu, &state.lambda, x, prob, params);
    if d.norm_inf().is_finite() {
        Ok(d)
    } else {
        Err(Error::NonFinite("flow derivative"))
    }
}

pub(crate) fn flow_rhs_unchecked(
    z: &DenseVector,
    mu: &DenseVector,
    lambda: &DenseVector,
    x: &DenseVector,
    prob: &MpcProblem,
    params: &FlowParams,
) -> FlowDerivative {
    let damping = params.damping();
    let lambda_dot = (prob.equality_residual(z, x) - lambda * params.alpha) / damping;
    let lambda_prime = lambda + &lambda_dot * params.beta;

    let mut z_dot = -prob.cost_gradient(z);
    z_dot.gemv_tr(-params.k(), prob.h(), &lambda_prime, 1.0);

    let mu_dot = match prob.inequality() {
        Some(ineq) => {
            z_dot.gemv_tr(-1.0, &ineq.g, mu, 1.0);
            project_vec(&ineq.eval(z), mu)
        }
        None => DenseVector::zeros(0),
    };
    FlowDerivative { z: z_dot, mu: mu_dot, lambda: lambda_dot }
}

/// `u = E z`.
pub fn control_output(state: &ControllerState, prob: &MpcProblem) -> DenseVector {
    state.z.rows(0, prob.m()).into_owned()
}

/// Euclidean projection onto the affine set `{z : H z + V x = 0}`.
///
/// Holds a factorization of `H Hᵀ`, which does not depend on the state.
#[derive(Debug, Clone)]
pub struct EqualityProjector {
    h: DenseMatrix,
    v: DenseMatrix,
    hht: LuFactor,
}

impl EqualityProjector {
    pub fn new(h: &DenseMatrix, v: &DenseMatrix) -> Result<Self> {
        let hht = h * h.transpose();
        let hht = LuFactor::new(&hht).map_err(|e| match e {
            Error::Singular { .. } => Error::RankDeficient,
            other => other,
        })?;
        Ok(Self { h: h.clone(), v: v.clone(), hht })
    }

    /// `z - Hᵀ (H Hᵀ)⁻¹ (H z + V x)`
    pub fn project(&self, z: &DenseVector, x: &DenseVector) -> Result<DenseVector> {
        if z.len() != self.h.ncols() || x.len() != self.v.ncols() {
            return Err(mismatch("projection operands do not match H and V"));
        }
        let residual = &self.h * z + &self.v * x;
        let w = self.hht.solve(&residual)?;
        let mut out = z.clone();
        out.gemv_tr(-1.0, &self.h, &w, 1.0);
        Ok(out)
    }
}

/// `{I - Hᵀ(HHᵀ)⁻¹H} z - Hᵀ(HHᵀ)⁻¹ V x`, using the problem's cached factorization.
pub fn project_equality(z: &DenseVector, x: &DenseVector, prob: &MpcProblem) -> Result<DenseVector> {
    prob.equality_projector()?.project(z, x)
}

/// The γ-extended flow.
///
/// For quadratic `f` and affine `g` the implicit equations are linear in
/// `(ż, λ̇)`:
///
/// ```text
/// ż + β Hᵀ λ̇           = -2F z - Gᵀ μ - Hᵀ λ
/// -γ H ż + (1+αβ) λ̇    = H z + V x - α λ
/// ```
///
/// The block matrix is state independent and is factored once.
#[derive(Debug, Clone)]
pub struct GammaFlow {
    params: FlowParams,
    system: LuFactor,
    nz: usize,
}

impl GammaFlow {
    pub fn new(prob: &MpcProblem, params: &FlowParams) -> Result<Self> {
        let nz = prob.nz();
        let ne = prob.n_eq();
        let mut sys = DenseMatrix::zeros(nz + ne, nz + ne);
        sys.view_mut((0, 0), (nz, nz)).fill_with_identity();
        sys.view_mut((0, nz), (nz, ne))
            .copy_from(&(prob.h().transpose() * params.beta()));
        sys.view_mut((nz, 0), (ne, nz))
            .copy_from(&(prob.h() * -params.gamma()));
        sys.view_mut((nz, nz), (ne, ne))
            .copy_from(&(DenseMatrix::identity(ne, ne) * params.damping()));
        Ok(Self { params: *params, system: LuFactor::new(&sys)?, nz })
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    pub fn rhs(&self, state: &ControllerState, x: &DenseVector, prob: &MpcProblem) -> Result<FlowDerivative> {
        check_inputs(state, x, prob)?;
        let d = self.rhs_unchecked(&state.z, &state.mu, &state.lambda, x, prob)?;
        if d.norm_inf().is_finite() {
            Ok(d)
        } else {
            Err(Error::NonFinite("γ-flow derivative"))
        }
    }

    pub(crate) fn rhs_unchecked(
        &self,
        z: &DenseVector,
        mu: &DenseVector,
        lambda: &DenseVector,
        x: &DenseVector,
        prob: &MpcProblem,
    ) -> Result<FlowDerivative> {
        let nz = self.nz;
        let mut top = -prob.cost_gradient(z);
        top.gemv_tr(-1.0, prob.h(), lambda, 1.0);
        if let Some(ineq) = prob.inequality() {
            top.gemv_tr(-1.0, &ineq.g, mu, 1.0);
        }
        let bottom = prob.equality_residual(z, x) - lambda * self.params.alpha();
        let rhs = DenseVector::from_iterator(nz + bottom.len(), top.iter().chain(bottom.iter()).copied());
        let sol = self.system.solve(&rhs)?;
        let z_dot = sol.rows(0, nz).into_owned();
        let lambda_dot = sol.rows(nz, sol.len() - nz).into_owned();
        let mu_dot = match prob.inequality() {
            Some(ineq) => project_vec(&ineq.eval(&(z + &z_dot * self.params.gamma())), mu),
            None => DenseVector::zeros(0),
        };
        Ok(FlowDerivative { z: z_dot, mu: mu_dot, lambda: lambda_dot })
    }
}

/// Evaluate the γ-extended flow (factors the implicit system on every call;
/// hold a [`GammaFlow`] to reuse it).
pub fn gamma_flow_rhs(
    state: &ControllerState,
    x: &DenseVector,
    prob: &MpcProblem,
    params: &FlowParams,
) -> Result<FlowDerivative> {
    GammaFlow::new(prob, params)?.rhs(state, x, prob)
}

/// Infinity-norm residuals of the KKT conditions of the condensed problem.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal_eq: f64,
    pub primal_ineq: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_eq)
            .max(self.primal_ineq)
            .max(self.dual)
            .max(self.complementarity)
    }
}

struct IneqParts {
    primal: f64,
    dual: f64,
    complementarity: f64,
}

fn inequality_parts(z: &DenseVector, mu: &DenseVector, prob: &MpcProblem) -> IneqParts {
    match prob.inequality() {
        Some(ineq) => {
            let g = ineq.eval(z);
            IneqParts {
                primal: g.iter().fold(0.0, |a, &v| a.max(v.max(0.0))),
                dual: mu.iter().fold(0.0, |a, &v| a.max((-v).max(0.0))),
                complementarity: vec_norm_inf(&mu.component_mul(&g)),
            }
        }
        None => IneqParts { primal: 0.0, dual: 0.0, complementarity: 0.0 },
    }
}

fn stationarity(z: &DenseVector, mu: &DenseVector, lambda: &DenseVector, dual_gain: f64, prob: &MpcProblem) -> f64 {
    let mut grad = prob.cost_gradient(z);
    grad.gemv_tr(dual_gain, prob.h(), lambda, 1.0);
    if let Some(ineq) = prob.inequality() {
        grad.gemv_tr(1.0, &ineq.g, mu, 1.0);
    }
    vec_norm_inf(&grad)
}

/// KKT residuals at `(z, μ, λ)` for plant state `x`.
pub fn residual_kkt(
    z: &DenseVector,
    mu: &DenseVector,
    lambda: &DenseVector,
    x: &DenseVector,
    prob: &MpcProblem,
) -> Result<KktResiduals> {
    ControllerState { z: z.clone(), mu: mu.clone(), lambda: lambda.clone() }.check(prob)?;
    prob.check_state(x)?;
    let ineq = inequality_parts(z, mu, prob);
    Ok(KktResiduals {
        stationarity: stationarity(z, mu, lambda, 1.0, prob),
        primal_eq: vec_norm_inf(&prob.equality_residual(z, x)),
        primal_ineq: ineq.primal,
        dual: ineq.dual,
        complementarity: ineq.complementarity,
    })
}

/// Residuals of the closed-loop controller equilibrium conditions.
///
/// Differs from the KKT system in two places: the dual feedback is scaled by
/// `K`, and the equality row is damped, `H z + V x - α λ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EquilibriumResiduals {
    pub stationarity: f64,
    pub primal_ineq: f64,
    pub dual: f64,
    pub complementarity: f64,
    pub damped_eq: f64,
}

impl EquilibriumResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_ineq)
            .max(self.dual)
            .max(self.complementarity)
            .max(self.damped_eq)
    }
}

pub fn residual_flow_equilibrium(
    state: &ControllerState,
    x: &DenseVector,
    prob: &MpcProblem,
    params: &FlowParams,
) -> Result<EquilibriumResiduals> {
    state.check(prob)?;
    prob.check_state(x)?;
    let ineq = inequality_parts(&state.z, &state.mu, prob);
    let damped = prob.equality_residual(&state.z, x) - &state.lambda * params.alpha();
    Ok(EquilibriumResiduals {
        stationarity: stationarity(&state.z, &state.mu, &state.lambda, params.k(), prob),
        primal_ineq: ineq.primal,
        dual: ineq.dual,
        complementarity: ineq.complementarity,
        damped_eq: vec_norm_inf(&damped),
    })
}

/// Interconnection signals of the closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// `λ' = λ + β λ̇`
    pub lambda_prime: DenseVector,
    /// `ξ = K Hᵀ λ'`
    pub xi: DenseVector,
    /// `η = ∇g(z) μ`
    pub eta: DenseVector,
    /// `e = -ξ - η`
    pub e: DenseVector,
}

pub fn diagnostics(
    state: &ControllerState,
    x: &DenseVector,
    prob: &MpcProblem,
    params: &FlowParams,
) -> Result<Diagnostics> {
    check_inputs(state, x, prob)?;
    let lambda_dot = (prob.equality_residual(&state.z, x) - &state.lambda * params.alpha()) / params.damping();
    let lambda_prime = &state.lambda + lambda_dot * params.beta();
    let xi = prob.h().tr_mul(&lambda_prime) * params.k();
    let eta = match prob.inequality() {
        Some(ineq) => ineq.g.tr_mul(&state.mu),
        None => DenseVector::zeros(prob.nz()),
    };
    let e = -(&xi + &eta);
    Ok(Diagnostics { lambda_prime, xi, eta, e })
}
