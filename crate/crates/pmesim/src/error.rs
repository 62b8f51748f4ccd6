use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the solver, particle, and diagnostic layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("composite u -> Phi^2(u)u decreases near u = {at} (delta = {delta})")]
    NonMonotoneComposite { at: f64, delta: f64 },

    #[error("Phi sample {value} at u = {at} exceeds declared bound {bound}")]
    UnboundedPhi { at: f64, value: f64, bound: f64 },

    #[error("resolvent bracket search failed for lambda = {lambda}, y = {y}")]
    ResolventBracketFailure { lambda: f64, y: f64 },

    #[error("negative ratio: eta = {eta} < 0 while u = {u} > 0")]
    NegativeRatio { u: f64, eta: f64 },

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("density has zero (or negative) mass")]
    ZeroMass,

    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("inner solver failed to converge after {sweeps} sweeps (residual {residual}) at step {step}")]
    NoConvergence {
        step: usize,
        sweeps: usize,
        residual: f64,
    },

    #[error("selection eta not in beta(u) at t-index {t_idx}, node {node}: u = {u}, eta = {eta}")]
    SelectionViolation {
        t_idx: usize,
        node: usize,
        u: f64,
        eta: f64,
    },

    #[error("time-change clock not strictly increasing on particle {particle}")]
    ClockInversionFailure { particle: usize },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unknown scenario `{0}`")]
    ScenarioUnknown(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
