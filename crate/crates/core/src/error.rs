use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error(
        "step-size guard violated: dt * max frequency = {product:.4} > {limit} (dt = {dt}, max frequency = {max_freq})"
    )]
    StepGuard {
        dt: f64,
        max_freq: f64,
        product: f64,
        limit: f64,
    },

    #[error("numerical abort at t = {time}: {detail}")]
    NumericalAbort { time: f64, detail: String },

    #[error("position grid too small: only {captured:.6} of the branch population lies on the grid; try a span of at least {suggested_span:.1}")]
    GridTooSmall { captured: f64, suggested_span: f64 },

    #[error("operation requires a grid-mode momentum ensemble")]
    NotGridEnsemble,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        field,
        reason: reason.into(),
    }
}
