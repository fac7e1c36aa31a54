//! Dissipativity certificate for the closed loop and runtime monitors for
//! the storage functions it is built from.
//!
//! Controller storage is `½(‖z‖² + ‖μ‖² + ‖λ‖²)`, plant storage `½‖x‖²`, and
//! the Lyapunov candidate is their sum with the plant part weighted by `δ`.
//! Negative definiteness of `Q_all` makes the Lyapunov derivative bounded by
//! a negative definite form in `(z, x)`.

use crate::error::{invalid, mismatch, Error, Result};
use crate::flow::{ControllerState, FlowParams};
use crate::numerics::{sym_eig_extremes, symmetrize, DenseMatrix, DenseVector};
use crate::problem::{MpcProblem, QsrTriple};
use crate::sim::SimLog;

/// Which coefficient multiplies `AᵀA` in the controller supply rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoefficientMode {
    /// `1 / (4α(1+αβ))`
    #[default]
    Theorem,
    /// `(1+2αβ)² / (4α(1+αβ))`, produced by completing the square on `λ'`.
    Proof,
}

impl CoefficientMode {
    pub fn name(self) -> &'static str {
        match self {
            CoefficientMode::Theorem => "theorem",
            CoefficientMode::Proof => "proof",
        }
    }
}

impl std::str::FromStr for CoefficientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theorem" => Ok(CoefficientMode::Theorem),
            "proof" => Ok(CoefficientMode::Proof),
            other => Err(invalid(format!("unknown coefficient mode '{other}' (expected theorem|proof)"))),
        }
    }
}

/// Everything `Q_all` depends on.
#[derive(Debug, Clone, Copy)]
pub struct CertificateInputs<'a> {
    pub prob: &'a MpcProblem,
    pub qsr: &'a QsrTriple,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub mode: CoefficientMode,
}

impl<'a> CertificateInputs<'a> {
    /// Uses `ρ = 2 λ_min(F)` from the problem and the theorem coefficient.
    pub fn new(prob: &'a MpcProblem, qsr: &'a QsrTriple, params: &FlowParams, delta: f64) -> Result<Self> {
        if qsr.n() != prob.n() || qsr.m() != prob.m() {
            return Err(mismatch(format!(
                "QSR triple is for n={}, m={} but the problem has n={}, m={}",
                qsr.n(),
                qsr.m(),
                prob.n(),
                prob.m()
            )));
        }
        let inputs = Self {
            prob,
            qsr,
            rho: prob.rho(),
            alpha: params.alpha(),
            beta: params.beta(),
            delta,
            mode: CoefficientMode::Theorem,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    /// Override `ρ`. Any value up to `2 λ_min(F)` keeps the strong-convexity
    /// premise true.
    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        self.rho = rho;
        self.validate()?;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_mode(mut self, mode: CoefficientMode) -> Self {
        self.mode = mode;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("α must be positive, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(invalid(format!("β must be nonnegative, got {}", self.beta)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid(format!("δ must be positive, got {}", self.delta)));
        }
        let bound = self.prob.rho();
        if !self.rho.is_finite() || self.rho > bound * (1.0 + 1e-12) {
            return Err(invalid(format!(
                "ρ = {} exceeds the strong-convexity constant 2·λ_min(F) = {bound}",
                self.rho
            )));
        }
        Ok(())
    }

    /// Coefficient on the `AᵀA` block for the current mode.
    pub fn coefficient(&self) -> f64 {
        let ab = self.alpha * self.beta;
        let base = 1.0 / (4.0 * self.alpha * (1.0 + ab));
        match self.mode {
            CoefficientMode::Theorem => base,
            CoefficientMode::Proof => (1.0 + 2.0 * ab).powi(2) * base,
        }
    }

    /// `true` when designer rows were appended to `H`/`V`, in which case the
    /// state block uses `VᵀV` instead of `AᵀA`.
    pub fn is_extended(&self) -> bool {
        self.prob.extra_rows() > 0
    }

    fn state_gram(&self) -> DenseMatrix {
        if self.is_extended() {
            self.prob.v().tr_mul(self.prob.v())
        } else {
            self.prob.a().tr_mul(self.prob.a())
        }
    }

    fn state_image(&self, x: &DenseVector) -> DenseVector {
        if self.is_extended() {
            self.prob.v() * x
        } else {
            self.prob.a() * x
        }
    }
}

/// Controller supply rate `[z; x]ᵀ M [z; x]` with
/// `M = [[-ρI - βHᵀH, -βHᵀV], [-βVᵀH, c AᵀA]]`.
pub fn supply_rate_flow(z: &DenseVector, x: &DenseVector, inputs: &CertificateInputs) -> f64 {
    let hz = inputs.prob.h() * z;
    let vx = inputs.prob.v() * x;
    let ax = inputs.state_image(x);
    -inputs.rho * z.norm_squared() - inputs.beta * hz.norm_squared() - 2.0 * inputs.beta * hz.dot(&vx)
        + inputs.coefficient() * ax.norm_squared()
}

/// Plant supply rate `xᵀQ_c x + 2 xᵀS_c E z + (Ez)ᵀ R_c (Ez)`.
pub fn supply_rate_plant(x: &DenseVector, z: &DenseVector, inputs: &CertificateInputs) -> f64 {
    let u = z.rows(0, inputs.prob.m()).into_owned();
    let qsr = inputs.qsr;
    x.dot(&(&qsr.q * x)) + 2.0 * x.dot(&(&qsr.s * &u)) + u.dot(&(&qsr.r * &u))
}

/// The composite matrix whose negative definiteness certifies stability.
pub fn build_q_all(inputs: &CertificateInputs) -> DenseMatrix {
    let prob = inputs.prob;
    let (nz, n) = (prob.nz(), prob.n());
    let h = prob.h();
    let e = prob.e();
    let q_sym = symmetrize(&inputs.qsr.q);
    let r_sym = symmetrize(&inputs.qsr.r);

    let top_left = DenseMatrix::identity(nz, nz) * -inputs.rho - h.tr_mul(h) * inputs.beta
        + e.tr_mul(&(&r_sym * e)) * inputs.delta;
    let off = h.tr_mul(prob.v()) * -inputs.beta + e.tr_mul(&inputs.qsr.s.transpose()) * inputs.delta;
    let bottom_right = inputs.state_gram() * inputs.coefficient() + q_sym * inputs.delta;

    let mut q = DenseMatrix::zeros(nz + n, nz + n);
    q.view_mut((0, 0), (nz, nz)).copy_from(&top_left);
    q.view_mut((0, nz), (nz, n)).copy_from(&off);
    q.view_mut((nz, 0), (n, nz)).copy_from(&off.transpose());
    q.view_mut((nz, nz), (n, n)).copy_from(&bottom_right);
    symmetrize(&q)
}

/// `(max eigenvalue < -margin, max eigenvalue)`.
pub fn check_negative_definite(s: &DenseMatrix, margin: f64) -> Result<(bool, f64)> {
    let (_, hi) = sym_eig_extremes(s)?;
    Ok((hi < -margin, hi))
}

/// `1e-3 ..= 1e3`, 61 log-spaced points.
pub fn default_delta_grid() -> Vec<f64> {
    (0..61).map(|i| 10f64.powf(-3.0 + 0.1 * i as f64)).collect()
}

/// Outcome of a scan over `δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSearch {
    /// Grid point with the smallest max eigenvalue.
    pub delta: f64,
    pub max_eigenvalue: f64,
}

impl DeltaSearch {
    pub fn certified(&self) -> bool {
        self.max_eigenvalue < 0.0
    }

    pub fn certified_delta(&self) -> Option<f64> {
        self.certified().then_some(self.delta)
    }
}

/// Scan `grid` for the `δ` minimizing the largest eigenvalue of `Q_all`.
/// Ties go to the smaller `δ`.
pub fn search_delta(inputs: &CertificateInputs, grid: &[f64]) -> Result<DeltaSearch> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<DeltaSearch> = None;
    for delta in sorted {
        let candidate = inputs.with_delta(delta)?;
        let (_, hi) = check_negative_definite(&build_q_all(&candidate), 0.0)?;
        if best.is_none_or(|b| hi < b.max_eigenvalue) {
            best = Some(DeltaSearch { delta, max_eigenvalue: hi });
        }
    }
    Ok(best.expect("grid is nonempty"))
}

/// Storage values and supply rates at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StorageReport {
    pub s_flow: f64,
    pub s_plant: f64,
    pub v_lyap: f64,
    pub w_flow: f64,
    pub w_plant: f64,
    /// `[z; x]ᵀ Q_all [z; x]`
    pub q_bound: f64,
}

pub fn storage_report(state: &ControllerState, x: &DenseVector, inputs: &CertificateInputs) -> StorageReport {
    let s_flow = 0.5 * (state.z.norm_squared() + state.mu.norm_squared() + state.lambda.norm_squared());
    let s_plant = 0.5 * x.norm_squared();
    let w_flow = supply_rate_flow(&state.z, x, inputs);
    let w_plant = supply_rate_plant(x, &state.z, inputs);
    StorageReport {
        s_flow,
        s_plant,
        v_lyap: s_flow + inputs.delta * s_plant,
        w_flow,
        w_plant,
        q_bound: w_flow + inputs.delta * w_plant,
    }
}

/// Relative tolerance for flagging a dissipation residual.
pub const MONITOR_RTOL: f64 = 1e-4;

/// Finite-difference check of the three dissipation inequalities between two
/// consecutive log rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorSample {
    /// Midpoint time.
    pub t: f64,
    /// `ΔS_flow/Δt - w_flow`
    pub flow: f64,
    /// `ΔS_plant/Δt - w_plant`
    pub plant: f64,
    /// `Δ𝒱/Δt - q`
    pub lyapunov: f64,
    pub flow_violation: bool,
    pub plant_violation: bool,
    pub lyapunov_violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipationReport {
    pub samples: Vec<MonitorSample>,
}

impl DissipationReport {
    pub fn flow_violations(&self) -> usize {
        self.samples.iter().filter(|s| s.flow_violation).count()
    }

    pub fn plant_violations(&self) -> usize {
        self.samples.iter().filter(|s| s.plant_violation).count()
    }

    pub fn lyapunov_violations(&self) -> usize {
        self.samples.iter().filter(|s| s.lyapunov_violation).count()
    }

    pub fn any_violation(&self) -> bool {
        self.flow_violations() + self.plant_violations() + self.lyapunov_violations() > 0
    }
}

/// Evaluate the dissipation inequalities along a logged trajectory.
///
/// Supply rates are averaged over each interval (trapezoid), which makes the
/// storage difference quotient a central estimate at the midpoint. A sample
/// is flagged when its residual exceeds `MONITOR_RTOL·(1 + |w|)` plus the
/// estimated quadrature error of the trapezoid average.
pub fn dissipation_monitor(log: &SimLog, inputs: &CertificateInputs) -> Result<DissipationReport> {
    let n = log.states.len();
    if n == 0 {
        return Err(Error::EmptyLog);
    }
    if n != log.times.len() {
        return Err(mismatch("log has mismatched time and state rows"));
    }
    if n < 2 {
        return Ok(DissipationReport { samples: Vec::new() });
    }
    let step = log.times[1] - log.times[0];
    for w in log.times.windows(2) {
        let dt = w[1] - w[0];
        if (dt - step).abs() > 1e-9 * step.abs().max(1.0) {
            return Err(Error::NonUniformLog { expected: step, found: dt });
        }
    }

    let reports: Vec<StorageReport> = log
        .states
        .iter()
        .map(|s| storage_report(&s.controller, &s.x_tilde, inputs))
        .collect();
    // trapezoid quadrature error of the supply rate over one interval is
    // Δt²|w''|/12; the second difference estimates Δt² w''
    let allowance = |pick: fn(&StorageReport) -> f64, i: usize| -> f64 {
        let d2 = |k: usize| -> f64 {
            if k == 0 || k + 1 >= reports.len() {
                0.0
            } else {
                (pick(&reports[k + 1]) - 2.0 * pick(&reports[k]) + pick(&reports[k - 1])).abs()
            }
        };
        d2(i).max(d2(i + 1)) / 6.0
    };

    let samples = (0..n - 1)
        .map(|i| {
            let (r0, r1) = (&reports[i], &reports[i + 1]);
            let dt = log.times[i + 1] - log.times[i];
            let w_flow = 0.5 * (r0.w_flow + r1.w_flow);
            let w_plant = 0.5 * (r0.w_plant + r1.w_plant);
            let q = 0.5 * (r0.q_bound + r1.q_bound);
            let flow = (r1.s_flow - r0.s_flow) / dt - w_flow;
            let plant = (r1.s_plant - r0.s_plant) / dt - w_plant;
            let lyapunov = (r1.v_lyap - r0.v_lyap) / dt - q;
            let flag = |residual: f64, w: f64, slack: f64| residual > MONITOR_RTOL * (1.0 + w.abs()) + slack;
            MonitorSample {
                t: 0.5 * (log.times[i] + log.times[i + 1]),
                flow,
                plant,
                lyapunov,
                flow_violation: flag(flow, w_flow, allowance(|r| r.w_flow, i)),
                plant_violation: flag(plant, w_plant, allowance(|r| r.w_plant, i)),
                lyapunov_violation: flag(lyapunov, q, allowance(|r| r.q_bound, i)),
            }
        })
        .collect();
    Ok(DissipationReport { samples })
}
