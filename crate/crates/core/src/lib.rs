//! Instant model predictive control for linear plants.
//!
//! Instead of solving the finite-horizon problem at each sample, the
//! controller runs a primal-dual gradient flow on it continuously and feeds
//! the current iterate's first input to the plant. The crate provides the
//! flow, a conventional sampled-MPC baseline, a dissipativity certificate
//! for the closed loop, and a simulator that ties them together.

pub mod baseline;
pub mod certify;
pub mod error;
pub mod flow;
pub mod numerics;
pub mod preset;
pub mod problem;
pub mod sim;

pub use baseline::{mpc_step, solve_equality_qp, QpSolution};
pub use certify::{
    build_q_all, check_negative_definite, dissipation_monitor, search_delta, storage_report,
    CertificateInputs, CoefficientMode, DeltaSearch, DissipationReport, StorageReport,
};
pub use error::{Error, Result};
pub use flow::{
    control_output, flow_rhs, gamma_flow_rhs, project_equality, residual_flow_equilibrium,
    residual_kkt, ControllerState, FlowDerivative, FlowParams, GammaFlow,
};
pub use numerics::{DenseMatrix, DenseVector};
pub use preset::{Experiment, ProblemSpec};
pub use problem::{CostWeights, LinearPlant, MpcProblem, QsrTriple, TrackingShift};
pub use sim::{
    benchmark_latency, simulate, simulate_impc, simulate_mpc, tracking_metrics, ControllerKind,
    LatencyReport, LatencyStats, SimConfig, SimLog, StorageSettings, TrackingMetrics,
};
