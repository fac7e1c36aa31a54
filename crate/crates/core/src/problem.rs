//! Plant model and the condensed finite-horizon problem built from it.
//!
//! The decision vector stacks the planned inputs first and the predicted
//! states second:
//!
//! ```text
//! z = [u(t), u(t,1), ..., u(t,N-1), x(t,1), ..., x(t,N)]
//! ```
//!
//! and the prediction model appears as the equality constraint
//! `H z + V x(t) = 0`.

use std::sync::OnceLock;

use crate::error::{invalid, mismatch, Error, Result};
use crate::flow::EqualityProjector;
use crate::numerics::{
    all_finite, expm, sym_eig_extremes, vec_norm_inf, DenseMatrix, DenseVector, LuFactor,
};

/// Continuous-time plant `ẋ = A_c x + B_c u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPlant {
    a_c: DenseMatrix,
    b_c: DenseMatrix,
}

impl LinearPlant {
    pub fn new(a_c: DenseMatrix, b_c: DenseMatrix) -> Result<Self> {
        if !a_c.is_square() {
            return Err(mismatch(format!(
                "A_c must be square, got {}x{}",
                a_c.nrows(),
                a_c.ncols()
            )));
        }
        if b_c.nrows() != a_c.nrows() || b_c.ncols() == 0 {
            return Err(mismatch(format!(
                "B_c must be {}xm with m >= 1, got {}x{}",
                a_c.nrows(),
                b_c.nrows(),
                b_c.ncols()
            )));
        }
        if a_c.nrows() == 0 {
            return Err(invalid("plant must have at least one state"));
        }
        if !all_finite(&a_c) || !all_finite(&b_c) {
            return Err(Error::NonFinite("plant matrices"));
        }
        Ok(Self { a_c, b_c })
    }

    pub fn a_c(&self) -> &DenseMatrix {
        &self.a_c
    }

    pub fn b_c(&self) -> &DenseMatrix {
        &self.b_c
    }

    /// State dimension `n`.
    pub fn n(&self) -> usize {
        self.a_c.nrows()
    }

    /// Input dimension `m`.
    pub fn m(&self) -> usize {
        self.b_c.ncols()
    }

    pub fn derivative(&self, x: &DenseVector, u: &DenseVector) -> DenseVector {
        &self.a_c * x + &self.b_c * u
    }
}

/// Quadratic supply-rate parameters `(Q_c, S_c, R_c)` of the plant.
#[derive(Debug, Clone, PartialEq)]
pub struct QsrTriple {
    pub q: DenseMatrix,
    pub s: DenseMatrix,
    pub r: DenseMatrix,
}

impl QsrTriple {
    pub fn new(q: DenseMatrix, s: DenseMatrix, r: DenseMatrix) -> Result<Self> {
        let n = q.nrows();
        let m = r.nrows();
        if !q.is_square() || !r.is_square() || s.nrows() != n || s.ncols() != m {
            return Err(mismatch(format!(
                "QSR blocks must be nxn, nxm, mxm; got Q {}x{}, S {}x{}, R {}x{}",
                q.nrows(),
                q.ncols(),
                s.nrows(),
                s.ncols(),
                r.nrows(),
                r.ncols()
            )));
        }
        if !all_finite(&q) || !all_finite(&s) || !all_finite(&r) {
            return Err(Error::NonFinite("QSR triple"));
        }
        Ok(Self { q, s, r })
    }

    /// `(A_c, B_c / 2, 0)`: with storage `½‖x‖²` the plant satisfies the
    /// dissipation inequality with equality.
    pub fn energy_balance(plant: &LinearPlant) -> Self {
        Self {
            q: plant.a_c.clone(),
            s: &plant.b_c * 0.5,
            r: DenseMatrix::zeros(plant.m(), plant.m()),
        }
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn m(&self) -> usize {
        self.r.nrows()
    }
}

/// Zero-order-hold discretization `(e^{A_c Δt}, ∫₀^Δt e^{A_c τ} dτ B_c)`.
///
/// Both blocks are read off the exponential of the augmented matrix
/// `[[A_c, B_c], [0, 0]] Δt`.
pub fn discretize(plant: &LinearPlant, dt: f64) -> Result<(DenseMatrix, DenseMatrix)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("sampling period must be positive, got {dt}")));
    }
    let (n, m) = (plant.n(), plant.m());
    let mut aug = DenseMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(plant.a_c() * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(plant.b_c() * dt));
    let e = expm(&aug)?;
    let a = e.view((0, 0), (n, n)).into_owned();
    let b = e.view((0, n), (n, m)).into_owned();
    if !all_finite(&a) || !all_finite(&b) {
        return Err(Error::NonFinite("discretized plant"));
    }
    Ok((a, b))
}

/// Prediction constraints `(H, V)` for horizon `N`.
///
/// Row block `p` encodes `x(t,p+1) = A x(t,p) + B u(t,p)` with `x(t,0) = x(t)`.
pub fn build_prediction_constraints(
    a: &DenseMatrix,
    b: &DenseMatrix,
    horizon: usize,
) -> Result<(DenseMatrix, DenseMatrix)> {
    if horizon == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n {
        return Err(mismatch(format!(
            "A must be nxn and B nxm; got A {}x{}, B {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let m = b.ncols();
    let nz = (m + n) * horizon;
    let state_col = |p: usize| m * horizon + p * n;

    let mut h = DenseMatrix::zeros(n * horizon, nz);
    for p in 0..horizon {
        let row = p * n;
        h.view_mut((row, p * m), (n, m)).copy_from(b);
        h.view_mut((row, state_col(p)), (n, n))
            .copy_from(&(-DenseMatrix::identity(n, n)));
        if p > 0 {
            h.view_mut((row, state_col(p - 1)), (n, n)).copy_from(a);
        }
    }
    let mut v = DenseMatrix::zeros(n * horizon, n);
    v.view_mut((0, 0), (n, n)).copy_from(a);
    Ok((h, v))
}

/// Diagonal stage weights of the quadratic cost `f(z) = zᵀ F z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub input: f64,
    pub state: f64,
    /// Weight on the last predicted state; `None` reuses `state`.
    pub terminal: Option<f64>,
}

impl CostWeights {
    pub fn uniform(input: f64, state: f64) -> Self {
        Self { input, state, terminal: None }
    }
}

/// `F = blkdiag(w_u I_{mN}, w_x I_{n(N-1)}, w_T I_n)`, ordered like `z`.
pub fn build_cost(weights: &CostWeights, horizon: usize, m: usize, n: usize) -> Result<DenseMatrix> {
    let terminal = weights.terminal.unwrap_or(weights.state);
    for (name, w) in [("input", weights.input), ("state", weights.state), ("terminal", terminal)] {
        if !(w > 0.0 && w.is_finite()) {
            return Err(invalid(format!("{name} weight must be positive, got {w}")));
        }
    }
    if horizon == 0 || m == 0 || n == 0 {
        return Err(invalid("cost dimensions must be positive"));
    }
    let nz = (m + n) * horizon;
    let diag = DenseVector::from_fn(nz, |i, _| {
        if i < m * horizon {
            weights.input
        } else if i >= nz - n {
            terminal
        } else {
            weights.state
        }
    });
    Ok(DenseMatrix::from_diagonal(&diag))
}

/// `ρ = 2 λ_min(F)`, the largest constant with `∇f(z)ᵀz ≥ ρ‖z‖²` for `f = zᵀFz`.
pub fn strong_convexity_rho(f: &DenseMatrix) -> Result<f64> {
    let (lo, _) = sym_eig_extremes(f)?;
    if lo <= 0.0 {
        return Err(Error::NotPositiveDefinite(lo));
    }
    Ok(2.0 * lo)
}

/// `E = [I 0 ... 0]`, picking the current input out of `z`.
pub fn selector_e(horizon: usize, m: usize, n: usize) -> DenseMatrix {
    let mut e = DenseMatrix::zeros(m, (m + n) * horizon);
    e.view_mut((0, 0), (m, m)).fill_with_identity();
    e
}

/// Affine inequality block `G z + g0 ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Inequality {
    pub g: DenseMatrix,
    pub g0: DenseVector,
}

impl Inequality {
    pub fn len(&self) -> usize {
        self.g0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g0.is_empty()
    }

    pub fn eval(&self, z: &DenseVector) -> DenseVector {
        &self.g * z + &self.g0
    }
}

/// Condensed finite-horizon problem: minimize `zᵀFz` subject to
/// `G z + g0 ≤ 0` and `H z + V x = 0`.
#[derive(Debug, Clone)]
pub struct MpcProblem {
    horizon: usize,
    dt: f64,
    n: usize,
    m: usize,
    a: DenseMatrix,
    b: DenseMatrix,
    h: DenseMatrix,
    v: DenseMatrix,
    e: DenseMatrix,
    f: DenseMatrix,
    f_diag: Option<DenseVector>,
    rho: f64,
    inequality: Option<Inequality>,
    extra_rows: usize,
    projector: OnceLock<Result<EqualityProjector>>,
}

impl MpcProblem {
    /// Discretize `plant` at `dt` and build the horizon-`N` problem.
    pub fn new(plant: &LinearPlant, horizon: usize, dt: f64, weights: &CostWeights) -> Result<Self> {
        let (a, b) = discretize(plant, dt)?;
        let f = build_cost(weights, horizon, plant.m(), plant.n())?;
        Self::from_discrete(a, b, horizon, dt, f)
    }

    /// Build from an already discretized model and an arbitrary SPD cost.
    pub fn from_discrete(
        a: DenseMatrix,
        b: DenseMatrix,
        horizon: usize,
        dt: f64,
        f: DenseMatrix,
    ) -> Result<Self> {
        let (h, v) = build_prediction_constraints(&a, &b, horizon)?;
        let (n, m) = (a.nrows(), b.ncols());
        let nz = (m + n) * horizon;
        if f.nrows() != nz || f.ncols() != nz {
            return Err(mismatch(format!(
                "cost matrix must be {nz}x{nz}, got {}x{}",
                f.nrows(),
                f.ncols()
            )));
        }
        if !all_finite(&f) {
            return Err(Error::NonFinite("cost matrix"));
        }
        if (&f - f.transpose()).amax() > 1e-12 * f.amax().max(1.0) {
            return Err(invalid("cost matrix must be symmetric"));
        }
        let f = crate::numerics::symmetrize(&f);
        let rho = strong_convexity_rho(&f)?;
        let is_diag = (0..nz).all(|i| (0..nz).all(|j| i == j || f[(i, j)] == 0.0));
        let f_diag = is_diag.then(|| f.diagonal());
        Ok(Self {
            horizon,
            dt,
            n,
            m,
            a,
            b,
            e: selector_e(horizon, m, n),
            h,
            v,
            f,
            f_diag,
            rho,
            inequality: None,
            extra_rows: 0,
            projector: OnceLock::new(),
        })
    }

    /// Attach affine inequality constraints `G z + g0 ≤ 0`.
    ///
    /// `g0 ≤ 0` is required so that the origin stays an equilibrium of the
    /// closed loop.
    pub fn with_inequalities(mut self, g: DenseMatrix, g0: DenseVector) -> Result<Self> {
        if g.ncols() != self.nz() || g.nrows() != g0.len() {
            return Err(mismatch(format!(
                "G must be qx{} with g0 of length q; got G {}x{}, g0 {}",
                self.nz(),
                g.nrows(),
                g.ncols(),
                g0.len()
            )));
        }
        if !all_finite(&g) || !g0.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("inequality block"));
        }
        if g0.iter().any(|&v| v > 0.0) {
            return Err(invalid("inequality offsets g0 must be nonpositive (origin must be feasible)"));
        }
        self.inequality = (!g0.is_empty()).then_some(Inequality { g, g0 });
        Ok(self)
    }

    /// Append designer equality rows `H_extra z + V_extra x = 0` below the
    /// prediction model.
    pub fn with_extra_equalities(mut self, h_extra: DenseMatrix, v_extra: DenseMatrix) -> Result<Self> {
        if h_extra.ncols() != self.nz() || v_extra.ncols() != self.n || h_extra.nrows() != v_extra.nrows() {
            return Err(mismatch(format!(
                "extra rows must be kx{} and kx{}; got {}x{} and {}x{}",
                self.nz(),
                self.n,
                h_extra.nrows(),
                h_extra.ncols(),
                v_extra.nrows(),
                v_extra.ncols()
            )));
        }
        let k = h_extra.nrows();
        let rows = self.h.nrows();
        let mut h = DenseMatrix::zeros(rows + k, self.nz());
        h.view_mut((0, 0), (rows, self.nz())).copy_from(&self.h);
        h.view_mut((rows, 0), (k, self.nz())).copy_from(&h_extra);
        let mut v = DenseMatrix::zeros(rows + k, self.n);
        v.view_mut((0, 0), (rows, self.n)).copy_from(&self.v);
        v.view_mut((rows, 0), (k, self.n)).copy_from(&v_extra);
        self.h = h;
        self.v = v;
        self.extra_rows += k;
        self.projector = OnceLock::new();
        Ok(self)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Length of `z`.
    pub fn nz(&self) -> usize {
        (self.m + self.n) * self.horizon
    }

    /// Number of equality rows (length of `λ`).
    pub fn n_eq(&self) -> usize {
        self.h.nrows()
    }

    /// Number of inequality rows (length of `μ`).
    pub fn n_ineq(&self) -> usize {
        self.inequality.as_ref().map_or(0, Inequality::len)
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn h(&self) -> &DenseMatrix {
        &self.h
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn e(&self) -> &DenseMatrix {
        &self.e
    }

    pub fn f(&self) -> &DenseMatrix {
        &self.f
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn inequality(&self) -> Option<&Inequality> {
        self.inequality.as_ref()
    }

    /// Number of designer rows appended after the prediction model.
    pub fn extra_rows(&self) -> usize {
        self.extra_rows
    }

    pub fn cost(&self, z: &DenseVector) -> f64 {
        z.dot(&self.cost_gradient(z)) * 0.5
    }

    /// `∇f(z) = 2 F z`.
    pub fn cost_gradient(&self, z: &DenseVector) -> DenseVector {
        match &self.f_diag {
            Some(d) => d.component_mul(z) * 2.0,
            None => &self.f * z * 2.0,
        }
    }

    /// `H z + V x`.
    pub fn equality_residual(&self, z: &DenseVector, x: &DenseVector) -> DenseVector {
        &self.h * z + &self.v * x
    }

    /// Checks that `H` has full row rank by factoring `H Hᵀ`.
    pub fn check_full_row_rank(&self) -> Result<()> {
        self.equality_projector().map(|_| ())
    }

    /// Cached projector onto `{z : H z + V x = 0}`.
    pub fn equality_projector(&self) -> Result<&EqualityProjector> {
        self.projector
            .get_or_init(|| EqualityProjector::new(&self.h, &self.v))
            .as_ref()
            .map_err(Clone::clone)
    }

    pub(crate) fn check_state(&self, x: &DenseVector) -> Result<()> {
        if x.len() != self.n {
            return Err(mismatch(format!("plant state has length {}, expected {}", x.len(), self.n)));
        }
        Ok(())
    }
}

/// Reference `r` and the steady input `u_r` holding the plant there.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingShift {
    pub r: DenseVector,
    pub u_r: DenseVector,
}

impl TrackingShift {
    pub fn zero(n: usize, m: usize) -> Self {
        Self { r: DenseVector::zeros(n), u_r: DenseVector::zeros(m) }
    }

    pub fn to_shifted(&self, x: &DenseVector) -> DenseVector {
        x - &self.r
    }

    pub fn state_from_shifted(&self, x_tilde: &DenseVector) -> DenseVector {
        x_tilde + &self.r
    }

    pub fn input_from_shifted(&self, u_tilde: &DenseVector) -> DenseVector {
        u_tilde + &self.u_r
    }
}

/// Solve `B_c u_r = -A_c r` (minimum norm) so that tracking `r` becomes
/// regulation of `x - r`.
pub fn shift_to_regulation(plant: &LinearPlant, r: &DenseVector) -> Result<TrackingShift> {
    if r.len() != plant.n() {
        return Err(mismatch(format!("reference has length {}, expected {}", r.len(), plant.n())));
    }
    let rhs = -(plant.a_c() * r);
    let svd = plant.b_c().clone().svd(true, true);
    let u_r = svd
        .solve(&rhs, 1e-14 * plant.b_c().amax().max(1.0))
        .map_err(|e| invalid(e.to_string()))?;
    let residual = vec_norm_inf(&(plant.b_c() * &u_r - &rhs));
    if residual > 1e-9 * vec_norm_inf(&rhs).max(1.0) {
        return Err(Error::InconsistentReference(residual));
    }
    Ok(TrackingShift { r: r.clone(), u_r })
}

/// LU-based rank of `m` (count of pivots above the singular threshold).
pub fn lu_rank(m: &DenseMatrix) -> usize {
    let square = if m.nrows() <= m.ncols() { m * m.transpose() } else { m.transpose() * m };
    match LuFactor::new(&square) {
        Ok(_) => square.nrows(),
        Err(_) => {
            let lu = square.clone().lu();
            let tol = crate::numerics::SINGULAR_PIVOT_RTOL * crate::numerics::norm_inf(&square);
            lu.u().diagonal().iter().filter(|v| v.abs() > tol).count()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_plant(a: f64, b: f64) -> LinearPlant {
        LinearPlant::new(
            DenseMatrix::from_element(1, 1, a),
            DenseMatrix::from_element(1, 1, b),
        )
        .unwrap()
    }

    #[test]
    fn discretize_zero_dynamics() {
        let plant = LinearPlant::new(DenseMatrix::zeros(2, 2), DenseMatrix::identity(2, 2)).unwrap();
        let (a, b) = discretize(&plant, 0.1).unwrap();
        assert_relative_eq!(a, DenseMatrix::identity(2, 2), epsilon = 1e-15);
        assert_relative_eq!(b, DenseMatrix::identity(2, 2) * 0.1, epsilon = 1e-15);
    }

    #[test]
    fn discretize_scalar_closed_form() {
        let (a, b) = discretize(&scalar_plant(-1.0, 1.0), 1.0).unwrap();
        let e = (-1.0f64).exp();
        assert_relative_eq!(a[(0, 0)], e, max_relative = 1e-12);
        assert_relative_eq!(b[(0, 0)], 1.0 - e, max_relative = 1e-12);
        assert!(discretize(&scalar_plant(-1.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn single_step_horizon_blocks() {
        let a = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DenseMatrix::from_row_slice(2, 1, &[5.0, 6.0]);
        let (h, v) = build_prediction_constraints(&a, &b, 1).unwrap();
        let expected = DenseMatrix::from_row_slice(2, 3, &[5.0, -1.0, 0.0, 6.0, 0.0, -1.0]);
        assert_eq!(h, expected);
        assert_eq!(v, a);
        assert!(build_prediction_constraints(&a, &b, 0).is_err());
    }

    #[test]
    fn cost_blocks_and_weights() {
        let f = build_cost(&CostWeights::uniform(1.0, 1000.0), 30, 1, 2).unwrap();
        assert_eq!(f.nrows(), 90);
        for i in 0..90 {
            assert_eq!(f[(i, i)], if i < 30 { 1.0 } else { 1000.0 });
        }
        assert_eq!(
            build_cost(&CostWeights::uniform(1.0, 1.0), 1, 2, 3).unwrap(),
            DenseMatrix::identity(5, 5)
        );
        let t = build_cost(&CostWeights { input: 1.0, state: 2.0, terminal: Some(7.0) }, 2, 1, 1).unwrap();
        assert_eq!(t.diagonal().as_slice(), &[1.0, 1.0, 2.0, 7.0]);
        assert!(build_cost(&CostWeights::uniform(0.0, 1.0), 1, 1, 1).is_err());
        assert!(build_cost(&CostWeights::uniform(1.0, -1.0), 1, 1, 1).is_err());
    }

    #[test]
    fn rho_is_twice_min_eigenvalue() {
        assert_relative_eq!(strong_convexity_rho(&DenseMatrix::identity(3, 3)).unwrap(), 2.0);
        let f = DenseMatrix::from_diagonal(&DenseVector::from_vec(vec![3.0, 5.0]));
        assert_relative_eq!(strong_convexity_rho(&f).unwrap(), 6.0);
        let f = DenseMatrix::from_diagonal(&DenseVector::from_vec(vec![1.0, -5.0]));
        assert!(matches!(strong_convexity_rho(&f), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn selector_picks_first_input() {
        assert_eq!(selector_e(1, 1, 1), DenseMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
        let e = selector_e(2, 2, 1);
        assert_eq!(e.nrows(), 2);
        assert_eq!(e.ncols(), 6);
        assert_eq!(e.view((0, 0), (2, 2)).into_owned(), DenseMatrix::identity(2, 2));
        assert_eq!(e.view((0, 2), (2, 4)).amax(), 0.0);
    }

    #[test]
    fn zero_reference_needs_zero_input() {
        let plant = scalar_plant(-2.0, 1.0);
        let shift = shift_to_regulation(&plant, &DenseVector::zeros(1)).unwrap();
        assert_eq!(shift.u_r[0], 0.0);
    }

    #[test]
    fn unreachable_reference_is_rejected() {
        // second state is driven only by itself; holding it away from zero is impossible
        let plant = LinearPlant::new(
            DenseMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.5]),
            DenseMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
        )
        .unwrap();
        let err = shift_to_regulation(&plant, &DenseVector::from_vec(vec![1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::InconsistentReference(_)));
    }

    #[test]
    fn inequality_offsets_must_keep_origin_feasible() {
        let plant = scalar_plant(-1.0, 1.0);
        let prob = MpcProblem::new(&plant, 2, 0.1, &CostWeights::uniform(1.0, 1.0)).unwrap();
        let g = DenseMatrix::from_row_slice(1, 4, &[1.0, 0.0, 0.0, 0.0]);
        assert!(prob.clone().with_inequalities(g.clone(), DenseVector::from_element(1, 0.5)).is_err());
        let p = prob.with_inequalities(g, DenseVector::from_element(1, -0.5)).unwrap();
        assert_eq!(p.n_ineq(), 1);
    }

    #[test]
    fn extra_rows_extend_h_and_v() {
        let plant = scalar_plant(-1.0, 1.0);
        let prob = MpcProblem::new(&plant, 2, 0.1, &CostWeights::uniform(1.0, 1.0)).unwrap();
        let prob = prob
            .with_extra_equalities(
                DenseMatrix::from_row_slice(1, 4, &[0.0, 0.0, 0.0, 1.0]),
                DenseMatrix::zeros(1, 1),
            )
            .unwrap();
        assert_eq!(prob.n_eq(), 3);
        assert_eq!(prob.extra_rows(), 1);
        prob.check_full_row_rank().unwrap();
    }

    #[test]
    fn rank_deficient_h_is_detected() {
        let plant = scalar_plant(-1.0, 1.0);
        let prob = MpcProblem::new(&plant, 1, 0.1, &CostWeights::uniform(1.0, 1.0)).unwrap();
        let dup_h = prob.h().clone();
        let dup_v = prob.v().clone();
        let prob = prob.with_extra_equalities(dup_h, dup_v).unwrap();
        assert_eq!(prob.check_full_row_rank(), Err(Error::RankDeficient));
        assert_eq!(lu_rank(prob.h()), 1);
    }
}
