use std::fmt;
use std::path::{Path, PathBuf};

use impc_core::certify::default_delta_grid;
use impc_core::numerics::DenseVector;
use impc_core::{CoefficientMode, ControllerKind, Experiment, FlowParams, ProblemSpec};
use serde::Deserialize;

/// Error in the invocation or configuration; maps to exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// JSON experiment description. Command-line flags override its fields.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub problem: Option<ProblemSpec>,
    pub out: Option<PathBuf>,
    pub coefficient_mode: Option<String>,
    #[serde(default)]
    pub cases: Vec<String>,
    pub controller: Option<String>,
    pub h: Option<f64>,
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub log_stride: Option<usize>,
    pub repetitions: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub config: Option<PathBuf>,
    pub cases: Vec<String>,
    pub out: Option<PathBuf>,
    pub coeff: Option<String>,
    pub controller: Option<String>,
    pub h: Option<f64>,
    pub t_end: Option<f64>,
    pub delta: Option<f64>,
    pub repetitions: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Case {
    /// Case text as given, e.g. `impc:10,10`.
    pub spec: String,
    /// File-name stem.
    pub label: String,
    pub kind: ControllerKind,
    pub params: Option<FlowParams>,
}

const CASE_GRAMMAR: &str = "mpc | impc:<alpha>,<beta> | impc_gamma:<alpha>,<beta>,<gamma> | impc_proj:<alpha>,<beta>";

fn parse_numbers(spec: &str, args: &str, count: usize) -> anyhow::Result<Vec<f64>> {
    let values: Vec<f64> = args
        .split(',')
        .map(|a| a.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("invalid case '{spec}': parameters must be numbers")))?;
    if values.len() != count {
        return Err(usage(format!(
            "invalid case '{spec}': expected {count} parameters, got {}",
            values.len()
        )));
    }
    Ok(values)
}

pub fn parse_case(spec: &str) -> anyhow::Result<Case> {
    let spec = spec.trim();
    if spec == "mpc" {
        return Ok(Case { spec: spec.into(), label: "mpc".into(), kind: ControllerKind::BaselineMpc, params: None });
    }
    let Some((head, args)) = spec.split_once(':') else {
        return Err(usage(format!("invalid case '{spec}': expected {CASE_GRAMMAR}")));
    };
    let (kind, count) = match head {
        "impc" => (ControllerKind::Impc, 2),
        "impc_proj" => (ControllerKind::ImpcProjected, 2),
        "impc_gamma" => (ControllerKind::ImpcGamma, 3),
        _ => return Err(usage(format!("invalid case '{spec}': expected {CASE_GRAMMAR}"))),
    };
    let v = parse_numbers(spec, args, count)?;
    let gamma = v.get(2).copied().unwrap_or(0.0);
    let params = FlowParams::with_gamma(v[0], v[1], gamma).map_err(|e| usage(format!("case '{spec}': {e}")))?;
    let case = Case { spec: spec.into(), label: String::new(), kind, params: Some(params) };
    Ok(relabel(case))
}

fn relabel(mut case: Case) -> Case {
    case.label = match (case.kind, case.params) {
        (ControllerKind::BaselineMpc, _) | (_, None) => "mpc".into(),
        (ControllerKind::Impc, Some(p)) => format!("impc_{}_{}", p.alpha(), p.beta()),
        (ControllerKind::ImpcProjected, Some(p)) => format!("impc_proj_{}_{}", p.alpha(), p.beta()),
        (ControllerKind::ImpcGamma, Some(p)) => format!("impc_gamma_{}_{}_{}", p.alpha(), p.beta(), p.gamma()),
    };
    case
}

pub const DEFAULT_H: f64 = 1e-3;
pub const DEFAULT_T: f64 = 5.0;
pub const DEFAULT_STRIDE: usize = 10;
pub const DEFAULT_REPETITIONS: usize = 1000;

/// Fully resolved run settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub spec: ProblemSpec,
    pub experiment: Experiment,
    pub cases: Vec<Case>,
    pub out: Option<PathBuf>,
    pub mode: CoefficientMode,
    /// Coefficient of the runtime monitor and logged bound; proof unless set explicitly.
    pub monitor_mode: CoefficientMode,
    pub h: f64,
    pub t_end: f64,
    pub x0: DenseVector,
    pub delta: f64,
    pub log_stride: usize,
    pub repetitions: usize,
    pub delta_grid: Vec<f64>,
    /// Settings that fell back to built-in defaults.
    pub defaults: Vec<String>,
}

impl Settings {
    pub fn flow_cases(&self) -> impl Iterator<Item = &Case> {
        self.cases.iter().filter(|c| c.params.is_some())
    }
}

fn positive(name: &str, v: f64) -> anyhow::Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("{name} must be positive, got {v}")))
    }
}

pub fn resolve(o: &Overrides) -> anyhow::Result<Settings> {
    if o.preset.is_some() && o.config.is_some() {
        return Err(usage("give either --preset or --config, not both"));
    }
    let cfg = match (&o.preset, &o.config) {
        (Some(name), None) => ExperimentConfig { preset: Some(name.clone()), ..Default::default() },
        (None, Some(path)) => ExperimentConfig::load(path)?,
        _ => return Err(usage("one of --preset or --config is required")),
    };
    let spec = match (&cfg.preset, &cfg.problem) {
        (Some(name), None) => ProblemSpec::by_name(name).map_err(|e| usage(e.to_string()))?,
        (None, Some(p)) => p.clone(),
        (Some(_), Some(_)) => return Err(usage("config must set exactly one of \"preset\" or \"problem\", not both")),
        (None, None) => return Err(usage("config must set one of \"preset\" or \"problem\"")),
    };
    let experiment = spec.build().map_err(|e| usage(format!("problem '{}': {e}", spec.name)))?;

    let case_texts = if !o.cases.is_empty() {
        o.cases.clone()
    } else if !cfg.cases.is_empty() {
        cfg.cases.clone()
    } else {
        spec.cases.clone()
    };
    if case_texts.is_empty() {
        return Err(usage("no cases given"));
    }
    let mut cases = case_texts.iter().map(|c| parse_case(c)).collect::<anyhow::Result<Vec<_>>>()?;

    if let Some(name) = o.controller.as_ref().or(cfg.controller.as_ref()) {
        let kind: ControllerKind = name.parse().map_err(|e: impc_core::Error| usage(e.to_string()))?;
        if kind == ControllerKind::BaselineMpc {
            return Err(usage("--controller must name a flow controller (impc, impc_projected, impc_gamma)"));
        }
        cases = cases
            .into_iter()
            .map(|c| if c.params.is_some() { relabel(Case { kind, ..c }) } else { c })
            .collect();
    }
    for (i, c) in cases.iter().enumerate() {
        if cases[..i].iter().any(|d| d.label == c.label) {
            return Err(usage(format!("case '{}' is given more than once", c.spec)));
        }
    }

    let (mode, monitor_mode) = match o.coeff.as_ref().or(cfg.coefficient_mode.as_ref()) {
        Some(m) => {
            let mode: CoefficientMode = m.parse().map_err(|e: impc_core::Error| usage(e.to_string()))?;
            (mode, mode)
        }
        None => (CoefficientMode::Theorem, CoefficientMode::Proof),
    };
    let mut defaults = Vec::new();
    let mut pick = |name: &str, given: Option<f64>, fallback: f64| {
        given.unwrap_or_else(|| {
            defaults.push(format!("{name} = {}", crate::csv_out::fmt_g(fallback)));
            fallback
        })
    };
    let h = positive("h", pick("h", o.h.or(cfg.h), DEFAULT_H))?;
    let t_end = positive("T", pick("T", o.t_end.or(cfg.t_end), DEFAULT_T))?;
    let delta = positive("δ", pick("δ", o.delta.or(cfg.delta), experiment.delta))?;
    let n = experiment.plant.n();
    let x0 = match &cfg.x0 {
        Some(v) if v.len() == n => DenseVector::from_vec(v.clone()),
        Some(v) => return Err(usage(format!("x0 has length {}, the plant has {n} states", v.len()))),
        None => DenseVector::zeros(n),
    };
    if o.coeff.is_none() && cfg.coefficient_mode.is_none() {
        defaults.push(format!("coefficient mode = {} (monitor {})", mode.name(), monitor_mode.name()));
    }
    if cfg.x0.is_none() {
        defaults.push("x0 = 0".into());
    }
    let log_stride = cfg.log_stride.unwrap_or_else(|| {
        defaults.push(format!("log stride = {DEFAULT_STRIDE}"));
        DEFAULT_STRIDE
    });
    if log_stride == 0 {
        return Err(usage("log_stride must be at least 1"));
    }
    let repetitions = o.repetitions.or(cfg.repetitions).unwrap_or(DEFAULT_REPETITIONS);

    let out = o.out.clone().or(cfg.out.clone());
    if let Some(dir) = &out {
        if !dir.is_dir() {
            return Err(usage(format!("output directory does not exist: {}", dir.display())));
        }
    }

    Ok(Settings {
        spec,
        experiment,
        cases,
        out,
        mode,
        monitor_mode,
        h,
        t_end,
        x0,
        delta,
        log_stride,
        repetitions,
        delta_grid: default_delta_grid(),
        defaults,
    })
}
