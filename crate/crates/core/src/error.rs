use thiserror::Error;

/// Errors raised by the chain library.
#[derive(Debug, Error)]
pub enum FkError {
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("integration blew up at t = {last_good_time} ({detail})")]
    Blowup { last_good_time: f64, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("incompatible states: {0}")]
    Incompatible(String),

    #[error("twist condition violated: -V12 = {value:.3e} < {delta:.3e} at (u, v) = ({u:.6}, {v:.6})")]
    TwistViolation { u: f64, v: f64, value: f64, delta: f64 },

    #[error("zero run spans the whole scanned window starting at site {start}")]
    DegreeOverflow { start: i64 },

    #[error("unsupported mode: {0}")]
    Unsupported(String),

    #[error("zero-balance audit failed with residual {residual} on window [{m}, {n})")]
    AuditFailure {
        residual: i64,
        m: i64,
        n: i64,
        events: Vec<crate::zeroset::ZeroEvent>,
    },

    #[error("ordered construction failed: {0}")]
    Construction(String),

    #[error("not a sliding state: modulation residual {residual:.3e} exceeds {tol:.1e}")]
    NotSliding { residual: f64, tol: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FkError>;
