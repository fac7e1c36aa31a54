use std::fmt::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use impc_core::certify::dissipation_monitor;
use impc_core::sim::max_state_gap;
use impc_core::{
    benchmark_latency, build_q_all, check_negative_definite, search_delta, simulate, tracking_metrics,
    CertificateInputs, CoefficientMode, ControllerKind, FlowParams, LatencyStats, SimConfig, SimLog,
    StorageSettings,
};
use rayon::prelude::*;

use crate::config::{usage, Case, Settings};
use crate::csv_out;
use crate::csv_out::fmt_g;
use crate::report::{self, verdict};

fn thread_count() -> anyhow::Result<usize> {
    match std::env::var("IMPC_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(usage(format!("IMPC_THREADS must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn write_text(dir: Option<&Path>, name: &str, text: &str) -> anyhow::Result<Option<PathBuf>> {
    match dir {
        Some(d) => {
            let path = d.join(name);
            std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
            Ok(Some(path))
        }
        None => Ok(None),
    }
}

fn certificate_inputs<'a>(s: &'a Settings, params: &FlowParams, mode: CoefficientMode) -> anyhow::Result<CertificateInputs<'a>> {
    let exp = &s.experiment;
    Ok(CertificateInputs::new(&exp.problem, &exp.qsr, params, s.delta)
        .and_then(|i| i.with_rho(exp.rho))
        .map_err(|e| usage(e.to_string()))?
        .with_mode(mode))
}

/// `(certified, max eigenvalue)` for both coefficient modes.
fn both_modes(s: &Settings, params: &FlowParams) -> anyhow::Result<[(CoefficientMode, bool, f64); 2]> {
    let mut out = [(CoefficientMode::Theorem, false, 0.0); 2];
    for (slot, mode) in out.iter_mut().zip([CoefficientMode::Theorem, CoefficientMode::Proof]) {
        let q = build_q_all(&certificate_inputs(s, params, mode)?);
        let (ok, max_eig) = check_negative_definite(&q, 0.0)?;
        *slot = (mode, ok, max_eig);
    }
    Ok(out)
}

fn header(s: &Settings, title: &str) -> String {
    let exp = &s.experiment;
    let prob = &exp.problem;
    let mut out = String::new();
    let _ = writeln!(out, "impc {title}");
    let _ = writeln!(
        out,
        "problem: {} (n = {}, m = {}, N = {}, Δt = {})",
        s.spec.name,
        prob.n(),
        prob.m(),
        prob.horizon(),
        fmt_g(prob.dt())
    );
    let _ = writeln!(
        out,
        "reference: r = {}, u_r = {}",
        report::vector(&exp.shift.r),
        report::vector(&exp.shift.u_r)
    );
    out
}

struct CaseRun {
    log: SimLog,
    file: PathBuf,
    rows: usize,
}

fn run_case(s: &Settings, case: &Case) -> anyhow::Result<CaseRun> {
    let exp = &s.experiment;
    let mut cfg = SimConfig::new(case.kind, s.x0.clone());
    cfg.t_end = s.t_end;
    cfg.h = s.h;
    cfg.log_stride = s.log_stride;
    cfg.storage = Some(StorageSettings { qsr: exp.qsr.clone(), delta: s.delta, mode: s.monitor_mode });
    let log = simulate(&exp.plant, &exp.problem, case.params.as_ref(), &exp.shift, &cfg)
        .with_context(|| format!("case '{}'", case.spec))?;
    let dir = s.out.as_deref().unwrap_or(Path::new("."));
    let file = dir.join(format!("{}.csv", case.label));
    csv_out::write_log(&file, &log)?;
    let rows = csv_out::validate(&file, log.n(), log.m())?;
    Ok(CaseRun { log, file, rows })
}

pub fn simulate_cmd(s: &Settings, plot: bool) -> anyhow::Result<String> {
    let threads = thread_count()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let runs: Vec<anyhow::Result<CaseRun>> = pool.install(|| s.cases.par_iter().map(|c| run_case(s, c)).collect());
    let runs = runs.into_iter().collect::<anyhow::Result<Vec<_>>>()?;

    let exp = &s.experiment;
    let mut out = header(s, "simulate report");
    let _ = writeln!(
        out,
        "settings: h = {}, T = {}, x0 = {}, log stride = {}, coefficient mode = {}, monitor mode = {}, δ = {}, ρ = {}",
        fmt_g(s.h),
        fmt_g(s.t_end),
        report::vector(&s.x0),
        s.log_stride,
        s.mode.name(),
        s.monitor_mode.name(),
        fmt_g(s.delta),
        fmt_g(exp.rho)
    );
    if !s.defaults.is_empty() {
        let _ = writeln!(out, "defaults used: {}", s.defaults.join(", "));
    }
    let baseline = s.cases.iter().zip(&runs).find(|(c, _)| c.kind == ControllerKind::BaselineMpc);

    for (case, run) in s.cases.iter().zip(&runs) {
        let name = run.file.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned());
        let _ = writeln!(out);
        let _ = writeln!(out, "case {} [{}] -> {name} ({} rows)", case.spec, case.kind.name(), run.rows);
        report::tracking(&mut out, &tracking_metrics(&run.log, &exp.shift.r)?);
        let feas_max = run.log.eq_feas.iter().copied().fold(0.0, f64::max);
        let feas_end = run.log.eq_feas.last().copied().unwrap_or(0.0);
        let _ = writeln!(out, "  plan equality residual |Hz+Vx̃|∞: max {feas_max:.3e}, final {feas_end:.3e}");
        if let Some(params) = &case.params {
            let _ = writeln!(out, "  RK4 substeps per step: {}", run.log.substeps);
            let modes = both_modes(s, params)?;
            let parts: Vec<String> = modes
                .iter()
                .map(|(m, ok, e)| format!("{} max eig {e:.6e} {}", m.name(), verdict(*ok)))
                .collect();
            let _ = writeln!(out, "  certificate (δ = {}): {}", fmt_g(s.delta), parts.join("; "));
            let inputs = certificate_inputs(s, params, s.monitor_mode)?;
            match dissipation_monitor(&run.log, &inputs) {
                Ok(rep) => {
                    let _ = writeln!(
                        out,
                        "  dissipation monitor ({}): {} flow, {} plant, {} Lyapunov violations over {} intervals",
                        s.monitor_mode.name(),
                        rep.flow_violations(),
                        rep.plant_violations(),
                        rep.lyapunov_violations(),
                        rep.samples.len()
                    );
                }
                Err(e) => {
                    let _ = writeln!(out, "  dissipation monitor: not evaluated ({e})");
                }
            }
            if let Some((_, base)) = baseline {
                if let Ok(gap) = max_state_gap(&run.log, &base.log) {
                    let _ = writeln!(out, "  sup gap to baseline mpc: {:.2}% of ‖r‖", 100.0 * gap / exp.shift.r.norm());
                }
            }
        } else {
            let _ = writeln!(out, "  certificate: not applicable to the sampled baseline");
        }
        match LatencyStats::from_samples(&run.log.latencies) {
            Some(l) => {
                let _ = writeln!(
                    out,
                    "  latency per decision: mean {:.4} ms, median {:.4} ms, p95 {:.4} ms ({} decisions)",
                    l.mean * 1e3,
                    l.median * 1e3,
                    l.p95 * 1e3,
                    l.count
                );
            }
            None => {
                let _ = writeln!(out, "  latency per decision: no samples");
            }
        }
    }

    write_text(s.out.as_deref(), "summary.txt", &out)?;
    if plot {
        let files: Vec<(String, String)> = s
            .cases
            .iter()
            .zip(&runs)
            .map(|(c, r)| {
                let name = r.file.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned());
                (name, c.spec.clone())
            })
            .collect();
        let script = report::gnuplot_script(&files, exp.plant.n(), exp.plant.m());
        let dir = s.out.as_deref().unwrap_or(Path::new("."));
        let path = dir.join("plot.gp");
        std::fs::write(&path, script).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(out)
}

pub fn certify_cmd(s: &Settings) -> anyhow::Result<String> {
    let exp = &s.experiment;
    let mut out = header(s, "certify report");
    let _ = writeln!(
        out,
        "certificate inputs: Q_c = {}, S_c = {}, R_c = {}, ρ = {}, δ = {}",
        report::matrix(&exp.qsr.q),
        report::matrix(&exp.qsr.s),
        report::matrix(&exp.qsr.r),
        fmt_g(exp.rho),
        fmt_g(s.delta)
    );
    let _ = writeln!(out, "verdict coefficient mode: {}", s.mode.name());
    let grid = &s.delta_grid;
    let flow: Vec<&Case> = s.flow_cases().collect();
    if flow.is_empty() {
        return Err(usage("certify needs at least one flow case (impc, impc_proj or impc_gamma)"));
    }
    for case in flow {
        let params = case.params.expect("flow case");
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "case {} (α = {}, β = {})",
            case.spec,
            fmt_g(params.alpha()),
            fmt_g(params.beta())
        );
        if case.kind != ControllerKind::Impc {
            let _ = writeln!(out, "  note: the certificate covers the plain flow with u = E z");
        }
        if certificate_inputs(s, &params, s.mode)?.is_extended() {
            let _ = writeln!(out, "  note: extended certificate, VᵀV replaces AᵀA for the appended equality rows");
        }
        for (mode, _, max_eig) in both_modes(s, &params)? {
            let c = certificate_inputs(s, &params, mode)?.coefficient();
            let _ = writeln!(out, "  max eig Q_all [{}, c = {c:.6e}] = {max_eig:.6e}", mode.name());
        }
        let search = search_delta(&certificate_inputs(s, &params, s.mode)?, grid)?;
        let found = match search.certified_delta() {
            Some(d) => format!("certified at δ = {}", fmt_g(d)),
            None => "no certifying δ".into(),
        };
        let _ = writeln!(
            out,
            "  δ search [{}] over {} points in [{}, {}]: best δ = {}, max eig = {:.6e}, {found}",
            s.mode.name(),
            grid.len(),
            fmt_g(grid[0]),
            fmt_g(grid[grid.len() - 1]),
            fmt_g(search.delta),
            search.max_eigenvalue
        );
        let q = build_q_all(&certificate_inputs(s, &params, s.mode)?);
        let (ok, _) = check_negative_definite(&q, 0.0)?;
        let _ = writeln!(out, "  verdict at δ = {}: {}", fmt_g(s.delta), verdict(ok));
    }
    write_text(s.out.as_deref(), "certify.txt", &out)?;
    Ok(out)
}

pub fn bench_cmd(s: &Settings) -> anyhow::Result<String> {
    let exp = &s.experiment;
    let flow: Vec<&Case> = s.flow_cases().collect();
    if flow.is_empty() {
        return Err(usage("bench needs at least one flow case (impc, impc_proj or impc_gamma)"));
    }
    if s.repetitions < 100 {
        return Err(usage(format!("--repetitions must be at least 100, got {}", s.repetitions)));
    }
    let x = exp.shift.to_shifted(&s.x0);
    let reports = flow
        .iter()
        .map(|c| benchmark_latency(&exp.problem, c.params.as_ref().expect("flow case"), &x, s.h, s.repetitions))
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = header(s, "bench report");
    let _ = writeln!(out, "hardware: {}", report::hardware_note());
    let _ = writeln!(
        out,
        "repetitions: {} per controller at x̃ = {}; baseline = cold KKT assembly, factorization and solve; flow = one vector-field evaluation plus one integrator step of h = {} in stable RK4 substeps",
        s.repetitions,
        report::vector(&x),
        fmt_g(s.h)
    );
    let _ = writeln!(out);
    report::latency_header(&mut out);
    let baseline = &reports[0].baseline;
    report::latency_line(&mut out, "mpc", baseline);
    for (case, r) in flow.iter().zip(&reports) {
        report::latency_line(&mut out, &case.spec, &r.impc);
    }
    let _ = writeln!(out);
    for (case, r) in flow.iter().zip(&reports) {
        let _ = writeln!(
            out,
            "ratio mpc / {} (mean): {:.2}  [{} RK4 substep(s) per decision]",
            case.spec,
            baseline.mean / r.impc.mean,
            r.substeps
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "reference values reported for the original experiment (different hardware and QP solver; not reproduced here):"
    );
    let _ = writeln!(out, "  mpc 9.80 ms, impc:10,10 0.331 ms, impc:10,1000 0.185 ms");
    write_text(s.out.as_deref(), "bench.txt", &out)?;
    Ok(out)
}
