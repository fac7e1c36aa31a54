mod common;

use common::*;
use impc_core::certify::dissipation_monitor;
use impc_core::numerics::{DenseMatrix, DenseVector};
use impc_core::sim::max_state_gap;
use impc_core::{
    simulate, tracking_metrics, CertificateInputs, CoefficientMode, ControllerKind, Error, FlowParams, SimConfig,
    SimLog,
};

fn run(kind: ControllerKind, params: Option<FlowParams>, x0: DenseVector, t_end: f64, h: f64, stride: usize) -> SimLog {
    let exp = dc_motor();
    let mut cfg = SimConfig::new(kind, x0);
    cfg.t_end = t_end;
    cfg.h = h;
    cfg.log_stride = stride;
    simulate(&exp.plant, &exp.problem, params.as_ref(), &exp.shift, &cfg).unwrap()
}

fn case2() -> Option<FlowParams> {
    Some(FlowParams::new(10.0, 10.0).unwrap())
}

#[test]
fn reference_is_an_equilibrium_for_every_controller() {
    let exp = dc_motor();
    let r = exp.shift.r.clone();
    let cases = [
        (ControllerKind::BaselineMpc, None),
        (ControllerKind::Impc, case2()),
        (ControllerKind::ImpcProjected, case2()),
        (ControllerKind::ImpcGamma, Some(FlowParams::with_gamma(10.0, 10.0, 0.1).unwrap())),
    ];
    for (kind, params) in cases {
        let log = run(kind, params, r.clone(), 0.5, 1e-3, 10);
        let gap = log.x.iter().map(|x| (x - &r).amax()).fold(0.0, f64::max);
        assert!(gap <= 1e-9, "{}: {gap}", kind.name());
        assert!((log.u[0][0] - exp.shift.u_r[0]).abs() <= 1e-9);
    }
}

#[test]
fn projected_and_gamma_variants_track_the_reference() {
    let exp = dc_motor();
    for (kind, params) in [
        (ControllerKind::ImpcProjected, case2()),
        (ControllerKind::ImpcGamma, Some(FlowParams::with_gamma(10.0, 10.0, 0.1).unwrap())),
    ] {
        let log = run(kind, params, DenseVector::zeros(2), 5.0, 1e-3, 10);
        let m = tracking_metrics(&log, &exp.shift.r).unwrap();
        assert!(m.final_error <= 0.02, "{}: {}", kind.name(), m.final_error);
    }
}

#[test]
fn halving_the_step_changes_little() {
    let a = run(ControllerKind::Impc, case2(), DenseVector::zeros(2), 1.0, 1e-3, 100);
    let b = run(ControllerKind::Impc, case2(), DenseVector::zeros(2), 1.0, 5e-4, 200);
    let gap = (a.x.last().unwrap() - b.x.last().unwrap()).norm();
    assert!(gap < 1e-6, "{gap}");
    assert!(max_state_gap(&a, &b).unwrap() < 1e-6);
}

#[test]
fn projected_plan_is_feasible() {
    let log = run(ControllerKind::ImpcProjected, case2(), DenseVector::zeros(2), 1.0, 1e-3, 10);
    let worst = log.eq_feas.iter().copied().fold(0.0, f64::max);
    assert!(worst <= 1e-8, "{worst}");
    // the raw flow plan is not
    let raw = run(ControllerKind::Impc, case2(), DenseVector::zeros(2), 1.0, 1e-3, 10);
    assert!(raw.eq_feas.iter().copied().fold(0.0, f64::max) > 1e-3);
}

#[test]
fn baseline_plan_is_feasible() {
    let log = run(ControllerKind::BaselineMpc, None, DenseVector::zeros(2), 1.0, 1e-3, 10);
    assert!(log.eq_feas.iter().copied().fold(0.0, f64::max) <= 1e-9);
    assert_eq!(log.latencies.len(), 10);
}

#[test]
fn inequality_multipliers_stay_nonnegative() {
    let exp = dc_motor();
    let prob = &exp.problem;
    let (nu, nz) = (prob.horizon(), prob.nz());
    // ũ_p ≤ 10 for every planned input
    let mut g = DenseMatrix::zeros(nu, nz);
    for p in 0..nu {
        g[(p, p)] = 1.0;
    }
    let prob = prob.clone().with_inequalities(g, DenseVector::from_element(nu, -10.0)).unwrap();
    let mut cfg = SimConfig::new(ControllerKind::Impc, DenseVector::zeros(2));
    cfg.t_end = 2.0;
    let log = simulate(&exp.plant, &prob, case2().as_ref(), &exp.shift, &cfg).unwrap();
    assert!(log.states.iter().all(|s| s.controller.mu.iter().all(|&m| m >= 0.0)));
    assert!(log.norm_mu.iter().any(|&m| m > 0.0));
}

#[test]
fn ise_does_not_depend_on_log_stride() {
    let exp = dc_motor();
    let fine = run(ControllerKind::Impc, case2(), DenseVector::zeros(2), 5.0, 1e-3, 1);
    let coarse = run(ControllerKind::Impc, case2(), DenseVector::zeros(2), 5.0, 1e-3, 10);
    let a = tracking_metrics(&fine, &exp.shift.r).unwrap().ise;
    let b = tracking_metrics(&coarse, &exp.shift.r).unwrap().ise;
    assert!((a - b).abs() <= 0.01 * a, "{a} vs {b}");
}

#[test]
fn plant_energy_balance_is_exact() {
    let exp = dc_motor();
    let params = FlowParams::new(10.0, 10.0).unwrap();
    let log = run(ControllerKind::Impc, Some(params), DenseVector::zeros(2), 2.0, 1e-3, 1);
    let inputs = CertificateInputs::new(&exp.problem, &exp.qsr, &params, 1.0).unwrap();
    let report = dissipation_monitor(&log, &inputs).unwrap();
    // the energy-balance supply rate makes the plant inequality an equality,
    // so only finite-difference error remains
    assert_eq!(report.plant_violations(), 0);
    let peak = log.storage.iter().map(|s| s.w_plant.abs()).fold(0.0, f64::max);
    assert!(peak > 1e3);
    for s in &report.samples {
        assert!(s.plant.abs() <= 1e-5 * peak, "{s:?}");
    }
}

#[test]
fn case2_is_stable_from_random_initial_conditions() {
    let exp = dc_motor();
    let mut rng = rng(11);
    for _ in 0..4 {
        let x0 = &exp.shift.r + random_vector(&mut rng, 2, 100.0);
        let log = run(ControllerKind::Impc, case2(), x0.clone(), 20.0, 1e-3, 100);
        let first = &log.states[0];
        let last = log.states.last().unwrap();
        let stack = |s: &impc_core::sim::LoggedState| {
            (s.x_tilde.norm_squared() + s.controller.z.norm_squared() + s.controller.lambda.norm_squared()).sqrt()
        };
        let ratio = stack(last) / stack(first);
        assert!(ratio <= 1e-3, "x0 {x0:?}: {ratio}");
        let v: Vec<f64> = log.storage.iter().map(|s| s.v_lyap).collect();
        assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-6 * v[0]));
    }
}

#[test]
fn monitor_rejects_bad_logs() {
    let exp = dc_motor();
    let params = FlowParams::new(10.0, 10.0).unwrap();
    let inputs = CertificateInputs::new(&exp.problem, &exp.qsr, &params, 1.0)
        .unwrap()
        .with_rho(2.0)
        .unwrap()
        .with_mode(CoefficientMode::Proof);
    let log = run(ControllerKind::Impc, Some(params), DenseVector::zeros(2), 0.5, 1e-3, 1);
    assert!(!dissipation_monitor(&log, &inputs).unwrap().any_violation());

    assert!(matches!(dissipation_monitor(&SimLog::default(), &inputs), Err(Error::EmptyLog)));

    let mut skewed = log.clone();
    skewed.times[3] += 5e-4;
    assert!(matches!(dissipation_monitor(&skewed, &inputs), Err(Error::NonUniformLog { .. })));

    // inflating the controller state mid-run creates storage from nothing
    let mut pumped = log.clone();
    let k = pumped.states.len() / 2;
    pumped.states[k].controller.z *= 3.0;
    pumped.states[k].controller.lambda *= 3.0;
    assert!(dissipation_monitor(&pumped, &inputs).unwrap().flow_violations() > 0);
}

#[test]
fn sampled_baseline_needs_integer_period() {
    let exp = dc_motor();
    let mut cfg = SimConfig::new(ControllerKind::BaselineMpc, DenseVector::zeros(2));
    cfg.h = 0.03;
    assert!(simulate(&exp.plant, &exp.problem, None, &exp.shift, &cfg).is_err());
    cfg.h = 0.2;
    assert!(simulate(&exp.plant, &exp.problem, None, &exp.shift, &cfg).is_err());
}

#[test]
fn flow_controller_needs_parameters() {
    let exp = dc_motor();
    let cfg = SimConfig::new(ControllerKind::Impc, DenseVector::zeros(2));
    assert!(simulate(&exp.plant, &exp.problem, None, &exp.shift, &cfg).is_err());
}
