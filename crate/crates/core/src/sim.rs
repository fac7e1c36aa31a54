//! Closed-loop simulation of the plant with either the continuous flow
//! controller or the sampled baseline MPC.
//!
//! All integration happens in shifted coordinates `x̃ = x - r`, `ũ = u - u_r`;
//! logged states and inputs are reported in the original coordinates.

use std::hint::black_box;
use std::time::Instant;

use crate::baseline::{mpc_step, solve_equality_qp};
use crate::certify::{storage_report, CertificateInputs, CoefficientMode, StorageReport};
use crate::error::{invalid, mismatch, Error, Result};
use crate::flow::{diagnostics, flow_rhs_unchecked, ControllerState, Diagnostics, FlowParams, GammaFlow};
use crate::numerics::{rk4_step, vec_norm_inf, DenseVector};
use crate::problem::{LinearPlant, MpcProblem, QsrTriple, TrackingShift};

/// `‖x̃‖` beyond which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Largest `h·‖J‖∞` accepted for one RK4 step; the real-axis stability
/// limit of classical RK4 is about 2.785.
pub const RK4_STABLE_PRODUCT: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    /// `u = E z`
    Impc,
    /// `u = E z_proj`, the projection of `z` onto the prediction constraints.
    ImpcProjected,
    /// γ-extended flow, `u = E z`.
    ImpcGamma,
    /// Sampled MPC with zero-order hold.
    BaselineMpc,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Impc => "impc",
            ControllerKind::ImpcProjected => "impc_projected",
            ControllerKind::ImpcGamma => "impc_gamma",
            ControllerKind::BaselineMpc => "baseline_mpc",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "impc" => Ok(ControllerKind::Impc),
            "impc_projected" | "impc_proj" => Ok(ControllerKind::ImpcProjected),
            "impc_gamma" => Ok(ControllerKind::ImpcGamma),
            "baseline_mpc" | "mpc" => Ok(ControllerKind::BaselineMpc),
            other => Err(invalid(format!("unknown controller '{other}'"))),
        }
    }
}

/// Parameters of the storage/supply-rate series recorded in the log.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageSettings {
    pub qsr: QsrTriple,
    pub delta: f64,
    pub mode: CoefficientMode,
}

impl StorageSettings {
    /// Energy-balance QSR triple, `δ = 1`, theorem coefficient.
    pub fn energy_balance(plant: &LinearPlant) -> Self {
        Self { qsr: QsrTriple::energy_balance(plant), delta: 1.0, mode: CoefficientMode::Theorem }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Simulated horizon in seconds.
    pub t_end: f64,
    /// Integrator step in seconds.
    pub h: f64,
    pub controller: ControllerKind,
    /// Initial plant state in original coordinates.
    pub x0: DenseVector,
    /// Initial controller state; zero when `None`.
    pub initial: Option<ControllerState>,
    /// Baseline sampling period; defaults to the problem's `Δt`.
    pub sample_period: Option<f64>,
    pub log_stride: usize,
    /// `None` uses [`StorageSettings::energy_balance`].
    pub storage: Option<StorageSettings>,
    /// Record `ξ, η, e, λ'` at every logged instant.
    pub diagnostics: bool,
}

impl SimConfig {
    /// `T = 5 s`, `h = 1 ms`, every 10th step logged.
    pub fn new(controller: ControllerKind, x0: DenseVector) -> Self {
        Self {
            t_end: 5.0,
            h: 1e-3,
            controller,
            x0,
            initial: None,
            sample_period: None,
            log_stride: 10,
            storage: None,
            diagnostics: false,
        }
    }

    fn validate(&self, prob: &MpcProblem) -> Result<f64> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(invalid(format!("horizon T must be positive, got {}", self.t_end)));
        }
        let period = self.sample_period.unwrap_or(prob.dt());
        if !(self.h > 0.0 && self.h <= period * (1.0 + 1e-12)) {
            return Err(invalid(format!(
                "integrator step h must satisfy 0 < h <= {period}, got {}",
                self.h
            )));
        }
        if self.log_stride == 0 {
            return Err(invalid("log stride must be at least 1"));
        }
        prob.check_state(&self.x0)?;
        if let Some(init) = &self.initial {
            init.check(prob)?;
            if init.mu.iter().any(|&m| m < 0.0) {
                return Err(invalid("initial μ must be nonnegative"));
            }
        }
        Ok(period)
    }

    fn steps(&self) -> usize {
        ((self.t_end / self.h) - 1e-9).ceil().max(1.0) as usize
    }
}

/// Full shifted-coordinate state at a logged instant.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedState {
    pub x_tilde: DenseVector,
    pub controller: ControllerState,
}

/// Time-indexed simulation record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub controller: Option<ControllerKind>,
    pub times: Vec<f64>,
    /// Plant state, original coordinates.
    pub x: Vec<DenseVector>,
    /// Applied input, original coordinates.
    pub u: Vec<DenseVector>,
    pub norm_z: Vec<f64>,
    pub norm_mu: Vec<f64>,
    pub norm_lambda: Vec<f64>,
    pub storage: Vec<StorageReport>,
    /// `‖H z + V x̃‖∞` for the plan that produced the input.
    pub eq_feas: Vec<f64>,
    pub diagnostics: Vec<Diagnostics>,
    pub states: Vec<LoggedState>,
    /// Wall-clock seconds per control decision.
    pub latencies: Vec<f64>,
    /// RK4 substeps taken per integrator step.
    pub substeps: usize,
}

impl SimLog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n(&self) -> usize {
        self.x.first().map_or(0, DenseVector::len)
    }

    pub fn m(&self) -> usize {
        self.u.first().map_or(0, DenseVector::len)
    }
}

struct Layout {
    n: usize,
    nz: usize,
    nq: usize,
    ne: usize,
}

impl Layout {
    fn of(prob: &MpcProblem) -> Self {
        Self { n: prob.n(), nz: prob.nz(), nq: prob.n_ineq(), ne: prob.n_eq() }
    }

    fn len(&self) -> usize {
        self.n + self.nz + self.nq + self.ne
    }

    fn pack(&self, x: &DenseVector, c: &ControllerState) -> DenseVector {
        DenseVector::from_iterator(
            self.len(),
            x.iter().chain(c.z.iter()).chain(c.mu.iter()).chain(c.lambda.iter()).copied(),
        )
    }

    fn x(&self, y: &DenseVector) -> DenseVector {
        y.rows(0, self.n).into_owned()
    }

    fn controller(&self, y: &DenseVector) -> ControllerState {
        ControllerState {
            z: y.rows(self.n, self.nz).into_owned(),
            mu: y.rows(self.n + self.nz, self.nq).into_owned(),
            lambda: y.rows(self.n + self.nz + self.nq, self.ne).into_owned(),
        }
    }

    fn mu_range(&self) -> std::ops::Range<usize> {
        self.n + self.nz..self.n + self.nz + self.nq
    }
}

enum Dynamics {
    Standard,
    Gamma(GammaFlow),
}

/// The coupled plant/controller vector field in shifted coordinates.
struct ClosedLoop<'a> {
    plant: &'a LinearPlant,
    prob: &'a MpcProblem,
    params: FlowParams,
    layout: Layout,
    dynamics: Dynamics,
    projected: bool,
}

impl<'a> ClosedLoop<'a> {
    fn new(plant: &'a LinearPlant, prob: &'a MpcProblem, params: &FlowParams, kind: ControllerKind) -> Result<Self> {
        let dynamics = match kind {
            ControllerKind::ImpcGamma => Dynamics::Gamma(GammaFlow::new(prob, params)?),
            ControllerKind::Impc | ControllerKind::ImpcProjected => Dynamics::Standard,
            ControllerKind::BaselineMpc => {
                return Err(invalid("baseline MPC is simulated by simulate_mpc"));
            }
        };
        let projected = kind == ControllerKind::ImpcProjected;
        if projected {
            prob.equality_projector()?;
        }
        Ok(Self { plant, prob, params: *params, layout: Layout::of(prob), dynamics, projected })
    }

    /// Plan whose first block is applied to the plant.
    fn applied_plan(&self, z: &DenseVector, x: &DenseVector) -> Result<DenseVector> {
        if self.projected {
            self.prob.equality_projector()?.project(z, x)
        } else {
            Ok(z.clone())
        }
    }

    fn input(&self, z: &DenseVector, x: &DenseVector) -> Result<DenseVector> {
        Ok(self.applied_plan(z, x)?.rows(0, self.prob.m()).into_owned())
    }

    fn rhs(&self, y: &DenseVector) -> DenseVector {
        let l = &self.layout;
        let x = l.x(y);
        let z = y.rows(l.n, l.nz).into_owned();
        let mu = y.rows(l.n + l.nz, l.nq).map(|v| v.max(0.0));
        let lambda = y.rows(l.n + l.nz + l.nq, l.ne).into_owned();

        let nan = || DenseVector::from_element(l.len(), f64::NAN);
        let Ok(u) = self.input(&z, &x) else { return nan() };
        let d = match &self.dynamics {
            Dynamics::Standard => flow_rhs_unchecked(&z, &mu, &lambda, &x, self.prob, &self.params),
            Dynamics::Gamma(g) => match g.rhs_unchecked(&z, &mu, &lambda, &x, self.prob) {
                Ok(d) => d,
                Err(_) => return nan(),
            },
        };
        let x_dot = self.plant.derivative(&x, &u);
        DenseVector::from_iterator(
            l.len(),
            x_dot.iter().chain(d.z.iter()).chain(d.mu.iter()).chain(d.lambda.iter()).copied(),
        )
    }

    /// Upper bound on the spectral radius of the vector field's Jacobian over
    /// the `x̃`, `z` and `λ` coordinates.
    fn stiffness_bound(&self) -> f64 {
        jacobian_row_bound(|y| self.rhs(y), self.layout.len(), self.layout.mu_range())
    }
}

/// `‖J‖∞` of an affine field by finite-difference columns (exact for the
/// affine part), ignoring the coordinates in `skip`.
fn jacobian_row_bound<F>(f: F, len: usize, skip: std::ops::Range<usize>) -> f64
where
    F: Fn(&DenseVector) -> DenseVector,
{
    let base = f(&DenseVector::zeros(len));
    let coords: Vec<usize> = (0..len).filter(|i| !skip.contains(i)).collect();
    let mut row_sums = vec![0.0; len];
    for &j in &coords {
        let mut e = DenseVector::zeros(len);
        e[j] = 1.0;
        let col = f(&e) - &base;
        for &i in &coords {
            row_sums[i] += col[i].abs();
        }
    }
    row_sums.into_iter().fold(0.0, f64::max)
}

/// Number of RK4 substeps so that each substep respects [`RK4_STABLE_PRODUCT`].
pub fn stable_substeps(h: f64, stiffness: f64) -> usize {
    if !stiffness.is_finite() || stiffness <= 0.0 {
        return 1;
    }
    ((h * stiffness / RK4_STABLE_PRODUCT).ceil() as usize).max(1)
}

struct Recorder<'a> {
    prob: &'a MpcProblem,
    shift: &'a TrackingShift,
    storage: StorageSettings,
    diagnostics: bool,
    log: SimLog,
}

impl<'a> Recorder<'a> {
    fn new(prob: &'a MpcProblem, plant: &LinearPlant, shift: &'a TrackingShift, config: &SimConfig) -> Self {
        Self {
            prob,
            shift,
            storage: config.storage.clone().unwrap_or_else(|| StorageSettings::energy_balance(plant)),
            diagnostics: config.diagnostics,
            log: SimLog { controller: Some(config.controller), ..SimLog::default() },
        }
    }

    fn certificate<'b>(&'b self, params: &FlowParams) -> Result<CertificateInputs<'b>> {
        Ok(CertificateInputs::new(self.prob, &self.storage.qsr, params, self.storage.delta)?
            .with_mode(self.storage.mode))
    }

    fn push_common(&mut self, t: f64, x_tilde: &DenseVector, u_tilde: &DenseVector, c: &ControllerState, feas: f64) {
        let log = &mut self.log;
        log.times.push(t);
        log.x.push(self.shift.state_from_shifted(x_tilde));
        log.u.push(self.shift.input_from_shifted(u_tilde));
        log.norm_z.push(c.z.norm());
        log.norm_mu.push(c.mu.norm());
        log.norm_lambda.push(c.lambda.norm());
        log.eq_feas.push(feas);
        log.states.push(LoggedState { x_tilde: x_tilde.clone(), controller: c.clone() });
    }

    fn record_flow(
        &mut self,
        t: f64,
        x_tilde: &DenseVector,
        c: &ControllerState,
        plan: &DenseVector,
        params: &FlowParams,
    ) -> Result<()> {
        let report = storage_report(c, x_tilde, &self.certificate(params)?);
        let feas = vec_norm_inf(&self.prob.equality_residual(plan, x_tilde));
        let u_tilde = plan.rows(0, self.prob.m()).into_owned();
        self.push_common(t, x_tilde, &u_tilde, c, feas);
        self.log.storage.push(report);
        if self.diagnostics {
            self.log.diagnostics.push(diagnostics(c, x_tilde, self.prob, params)?);
        }
        Ok(())
    }

    fn record_sampled(&mut self, t: f64, x_tilde: &DenseVector, c: &ControllerState, u_tilde: &DenseVector, feas: f64) {
        let s_flow = 0.5 * (c.z.norm_squared() + c.lambda.norm_squared());
        let s_plant = 0.5 * x_tilde.norm_squared();
        let q = &self.storage.qsr;
        let w_plant = x_tilde.dot(&(&q.q * x_tilde)) + 2.0 * x_tilde.dot(&(&q.s * u_tilde)) + u_tilde.dot(&(&q.r * u_tilde));
        let report = StorageReport {
            s_flow,
            s_plant,
            v_lyap: s_flow + self.storage.delta * s_plant,
            w_flow: 0.0,
            w_plant,
            q_bound: 0.0,
        };
        self.push_common(t, x_tilde, u_tilde, c, feas);
        self.log.storage.push(report);
    }
}

fn check_divergence(t: f64, x_tilde: &DenseVector) -> Result<()> {
    if !x_tilde.iter().all(|v| v.is_finite()) {
        return Err(Error::IntegrationFailure { t });
    }
    let norm = x_tilde.norm();
    if norm > DIVERGENCE_LIMIT {
        return Err(Error::Diverged { t, norm });
    }
    Ok(())
}

fn check_shift(plant: &LinearPlant, shift: &TrackingShift) -> Result<()> {
    if shift.r.len() != plant.n() || shift.u_r.len() != plant.m() {
        return Err(mismatch("tracking shift does not match the plant"));
    }
    Ok(())
}

fn check_plant(plant: &LinearPlant, prob: &MpcProblem) -> Result<()> {
    if plant.n() != prob.n() || plant.m() != prob.m() {
        return Err(mismatch(format!(
            "plant (n={}, m={}) does not match problem (n={}, m={})",
            plant.n(),
            plant.m(),
            prob.n(),
            prob.m()
        )));
    }
    Ok(())
}

/// Integrate the plant coupled to the flow controller.
pub fn simulate_impc(
    plant: &LinearPlant,
    prob: &MpcProblem,
    params: &FlowParams,
    shift: &TrackingShift,
    config: &SimConfig,
) -> Result<SimLog> {
    config.validate(prob)?;
    check_plant(plant, prob)?;
    check_shift(plant, shift)?;
    let closed = ClosedLoop::new(plant, prob, params, config.controller)?;
    let layout = &closed.layout;

    let init = config.initial.clone().unwrap_or_else(|| ControllerState::zeros(prob));
    let mut y = layout.pack(&shift.to_shifted(&config.x0), &init);
    let substeps = stable_substeps(config.h, closed.stiffness_bound());
    let h_sub = config.h / substeps as f64;
    let steps = config.steps();

    let mut rec = Recorder::new(prob, plant, shift, config);
    rec.log.substeps = substeps;
    rec.log.latencies.reserve(steps);

    let record = |rec: &mut Recorder, t: f64, y: &DenseVector| -> Result<()> {
        let x = layout.x(y);
        let c = layout.controller(y);
        let plan = closed.applied_plan(&c.z, &x)?;
        rec.record_flow(t, &x, &c, &plan, params)
    };
    record(&mut rec, 0.0, &y)?;

    let mu_range = layout.mu_range();
    for k in 1..=steps {
        let t0 = (k - 1) as f64 * config.h;
        let started = Instant::now();
        for s in 0..substeps {
            y = rk4_step(|_, y| closed.rhs(y), t0 + s as f64 * h_sub, &y, h_sub)?;
            for i in mu_range.clone() {
                y[i] = y[i].max(0.0);
            }
        }
        rec.log.latencies.push(started.elapsed().as_secs_f64());
        let t = k as f64 * config.h;
        check_divergence(t, &layout.x(&y))?;
        if k % config.log_stride == 0 || k == steps {
            record(&mut rec, t, &y)?;
        }
    }
    Ok(rec.log)
}

/// Integrate the plant under sampled MPC with zero-order hold.
pub fn simulate_mpc(plant: &LinearPlant, prob: &MpcProblem, shift: &TrackingShift, config: &SimConfig) -> Result<SimLog> {
    if config.controller != ControllerKind::BaselineMpc {
        return Err(invalid("simulate_mpc needs the baseline_mpc controller"));
    }
    let period = config.validate(prob)?;
    check_plant(plant, prob)?;
    check_shift(plant, shift)?;
    let per_sample = (period / config.h).round() as usize;
    if per_sample == 0 || (per_sample as f64 * config.h - period).abs() > 1e-9 * period {
        return Err(invalid(format!(
            "sample period {period} must be an integer multiple of h = {}",
            config.h
        )));
    }

    let mut x = shift.to_shifted(&config.x0);
    let steps = config.steps();
    let mut rec = Recorder::new(prob, plant, shift, config);
    rec.log.substeps = 1;

    let mut held = ControllerState::zeros(prob);
    let mut u = DenseVector::zeros(prob.m());
    let mut feas = 0.0;
    for k in 0..=steps {
        let t = k as f64 * config.h;
        if k % per_sample == 0 && k < steps {
            let started = Instant::now();
            let sol = solve_equality_qp(prob, &x)?;
            rec.log.latencies.push(started.elapsed().as_secs_f64());
            u = sol.z.rows(0, prob.m()).into_owned();
            feas = vec_norm_inf(&prob.equality_residual(&sol.z, &x));
            held = ControllerState { z: sol.z, mu: DenseVector::zeros(0), lambda: sol.lambda };
        }
        if k % config.log_stride == 0 || k == steps {
            rec.record_sampled(t, &x, &held, &u, feas);
        }
        if k == steps {
            break;
        }
        x = rk4_step(|_, x| plant.derivative(x, &u), t, &x, config.h)?;
        check_divergence(t + config.h, &x)?;
    }
    Ok(rec.log)
}

/// Dispatch on `config.controller`.
pub fn simulate(
    plant: &LinearPlant,
    prob: &MpcProblem,
    params: Option<&FlowParams>,
    shift: &TrackingShift,
    config: &SimConfig,
) -> Result<SimLog> {
    match (config.controller, params) {
        (ControllerKind::BaselineMpc, _) => simulate_mpc(plant, prob, shift, config),
        (_, Some(p)) => simulate_impc(plant, prob, p, shift, config),
        (_, None) => Err(invalid("flow controllers need (α, β) parameters")),
    }
}

/// Summary statistics of latency samples, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

impl LatencyStats {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let pick = |q: f64| sorted[((q * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1)];
        Some(Self {
            count: sorted.len(),
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            median: pick(0.5),
            p95: pick(0.95),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub baseline: LatencyStats,
    pub impc: LatencyStats,
    pub baseline_samples: Vec<f64>,
    pub impc_samples: Vec<f64>,
    /// RK4 substeps per flow decision.
    pub substeps: usize,
}

impl LatencyReport {
    /// `mean(baseline) / mean(iMPC)`
    pub fn ratio(&self) -> f64 {
        self.baseline.mean / self.impc.mean
    }
}

/// Wall-clock time per control decision.
///
/// Baseline: one cold KKT assembly, factorization and solve. Flow
/// controller: one vector-field evaluation plus one integrator step of length
/// `h` of the controller state with `x̃` frozen, split into as many RK4
/// substeps as stability requires.
pub fn benchmark_latency(
    prob: &MpcProblem,
    params: &FlowParams,
    x_tilde: &DenseVector,
    h: f64,
    repetitions: usize,
) -> Result<LatencyReport> {
    if repetitions < 100 {
        return Err(invalid(format!("at least 100 repetitions are required, got {repetitions}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("step size must be positive, got {h}")));
    }
    prob.check_state(x_tilde)?;
    mpc_step(prob, x_tilde)?;

    let layout = Layout::of(prob);
    let ctrl_len = layout.nz + layout.nq + layout.ne;
    let split = |c: &DenseVector| {
        (
            c.rows(0, layout.nz).into_owned(),
            c.rows(layout.nz, layout.nq).map(|v| v.max(0.0)),
            c.rows(layout.nz + layout.nq, layout.ne).into_owned(),
        )
    };
    let controller_rhs = |c: &DenseVector| {
        let (z, mu, lambda) = split(c);
        let d = flow_rhs_unchecked(&z, &mu, &lambda, x_tilde, prob, params);
        DenseVector::from_iterator(ctrl_len, d.z.iter().chain(d.mu.iter()).chain(d.lambda.iter()).copied())
    };

    let mut baseline = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let started = Instant::now();
        black_box(mpc_step(black_box(prob), black_box(x_tilde))?);
        baseline.push(started.elapsed().as_secs_f64());
    }

    let substeps = stable_substeps(h, jacobian_row_bound(controller_rhs, ctrl_len, layout.nz..layout.nz + layout.nq));
    let h_sub = h / substeps as f64;
    let mut impc = Vec::with_capacity(repetitions);
    let mut c = DenseVector::zeros(ctrl_len);
    for _ in 0..repetitions {
        let started = Instant::now();
        for _ in 0..substeps {
            c = rk4_step(|_, c| controller_rhs(c), 0.0, &c, h_sub)?;
        }
        black_box(&c);
        impc.push(started.elapsed().as_secs_f64());
    }

    Ok(LatencyReport {
        baseline: LatencyStats::from_samples(&baseline).expect("nonempty"),
        impc: LatencyStats::from_samples(&impc).expect("nonempty"),
        baseline_samples: baseline,
        impc_samples: impc,
        substeps,
    })
}

/// Tracking quality of a logged run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingMetrics {
    /// `∫ ‖x - r‖² dt` (trapezoid rule on the log grid).
    pub ise: f64,
    /// `‖x(T) - r‖ / ‖r‖` (absolute error when `r = 0`).
    pub final_error: f64,
    /// First logged time after which the relative error stays below 2%.
    pub settling_time: Option<f64>,
}

pub const SETTLING_BAND: f64 = 0.02;

pub fn tracking_metrics(log: &SimLog, r: &DenseVector) -> Result<TrackingMetrics> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    if log.n() != r.len() {
        return Err(mismatch(format!("reference has length {}, log states have {}", r.len(), log.n())));
    }
    let scale = if r.norm() > 0.0 { r.norm() } else { 1.0 };
    let err2: Vec<f64> = log.x.iter().map(|x| (x - r).norm_squared()).collect();
    let ise = log
        .times
        .windows(2)
        .zip(err2.windows(2))
        .map(|(t, e)| 0.5 * (t[1] - t[0]) * (e[0] + e[1]))
        .sum();
    let rel: Vec<f64> = err2.iter().map(|e| e.sqrt() / scale).collect();
    let settling_time = match rel.iter().rposition(|&e| e >= SETTLING_BAND) {
        None => Some(log.times[0]),
        Some(i) if i + 1 < rel.len() => Some(log.times[i + 1]),
        Some(_) => None,
    };
    Ok(TrackingMetrics { ise, final_error: *rel.last().expect("nonempty"), settling_time })
}

/// `max_t ‖x_a(t) - x_b(t)‖` over two logs on the same time grid.
pub fn max_state_gap(a: &SimLog, b: &SimLog) -> Result<f64> {
    if a.len() != b.len() || a.times.iter().zip(&b.times).any(|(s, t)| (s - t).abs() > 1e-9) {
        return Err(mismatch("logs are not on the same time grid"));
    }
    Ok(a.x.iter().zip(&b.x).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max))
}
