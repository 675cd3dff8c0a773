use thiserror::Error;

/// Errors produced by the simulation toolkit.
#[derive(Debug, Error)]
pub enum UpbError {
    #[error("invalid truncation: cavity {cavity} needs at least 2 levels, got {levels}")]
    InvalidTruncation { cavity: u8, levels: usize },

    #[error("invalid cavity index {0} (expected 1 or 2)")]
    InvalidCavity(u8),

    #[error("operands act on different Hilbert spaces ({left} vs {right})")]
    SpaceMismatch { left: String, right: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("correlation undefined: occupation {occupation:e} below threshold")]
    UndefinedCorrelation { occupation: f64 },

    #[error("steady state solve failed: {0}")]
    SteadyState(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("trajectory {trajectory_id} failed: {reason}")]
    Trajectory { trajectory_id: u64, reason: String },

    #[error("filter window: {0}")]
    FilterWindow(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl UpbError {
    /// Short machine-readable tag used by the CLI and the C interface.
    pub fn kind(&self) -> &'static str {
        match self {
            UpbError::InvalidTruncation { .. } => "invalid-truncation",
            UpbError::InvalidCavity(_) => "invalid-cavity",
            UpbError::SpaceMismatch { .. } => "space-mismatch",
            UpbError::InvalidParameter(_) => "invalid-parameter",
            UpbError::UndefinedCorrelation { .. } => "undefined-correlation",
            UpbError::SteadyState(_) => "steady-state",
            UpbError::Integration { .. } => "integration",
            UpbError::Trajectory { .. } => "trajectory",
            UpbError::FilterWindow(_) => "filter-window",
            UpbError::Parse { .. } => "parse",
            UpbError::Config(_) => "config",
            UpbError::Io(_) => "io",
            UpbError::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, UpbError>;
