use alloc::string::String;
use alloc::vec::Vec;

/// Everything that can go wrong inside the model, the likelihood, and the solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("time reversal: state is at t={current}, cannot move back to t={requested}")]
    TimeReversal { current: f64, requested: f64 },

    #[error("stale state: state is at t={state} but event occurs at t={event}; advance first")]
    StaleState { state: f64, event: f64 },

    #[error("user id {user} out of range for {n_users} users")]
    UserOutOfRange { user: usize, n_users: usize },

    #[error("cascade id {cascade} out of range for {n_cascades} cascades")]
    CascadeOutOfRange { cascade: usize, n_cascades: usize },

    #[error("invalid event #{index}: {reason}")]
    InvalidEvent { index: usize, reason: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid window [{t0}, {t1}]")]
    InvalidWindow { t0: f64, t1: f64 },

    #[error("impossible event #{index} (user {user}, cascade {cascade}, t={time}): zero intensity")]
    ImpossibleEvent {
        index: usize,
        user: usize,
        cascade: usize,
        time: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("I - W^T tau is singular: W^T has eigenvalue {re}{im:+}i with tau*lambda = 1")]
    Singular { re: f64, im: f64 },

    #[error("unstable parameters: spectral radius {rho} >= 1/tau = {threshold}")]
    Unstable { rho: f64, threshold: f64 },

    #[error("{stage} solver failed after {iterations} iterations: {reason}")]
    SolverFailure {
        stage: String,
        iterations: usize,
        reason: String,
        trace: Vec<f64>,
    },

    #[error("event log too small: {0}")]
    LogTooSmall(String),

    #[error("correlation undefined: zero-variance series")]
    UndefinedCorrelation,

    #[error("ODE integration failed at t={t}: step size {step} underflowed")]
    IntegrationFailure { t: f64, step: f64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
