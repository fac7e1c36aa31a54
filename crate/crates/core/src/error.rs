use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is singular: pivot {pivot:.3e} below threshold {threshold:.3e}")]
    Singular { pivot: f64, threshold: f64 },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("integration failed at t = {t}: non-finite derivative")]
    IntegrationFailure { t: f64 },

    #[error("trajectory diverged at t = {t} (|x| = {norm:.3e})")]
    Diverged { t: f64, norm: f64 },

    #[error("{0}")]
    InvalidParameter(String),

    #[error("cost matrix is not positive definite (min eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),

    #[error("reference is not an equilibrium of the plant (steady-input residual {0:.3e})")]
    InconsistentReference(f64),

    #[error("equality constraint matrix H does not have full row rank")]
    RankDeficient,

    #[error("{0} does not support inequality constraints")]
    UnsupportedInequality(&'static str),

    #[error("delta grid is empty")]
    EmptyGrid,

    #[error("simulation log is empty")]
    EmptyLog,

    #[error("simulation log is not uniformly sampled (step {found} vs {expected})")]
    NonUniformLog { expected: f64, found: f64 },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
