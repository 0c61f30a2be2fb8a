use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation at a coincident source/receiver point.
    #[error("singular point: {0}")]
    SingularPoint(String),

    /// Symbol evaluation on (or numerically at) a resonant circle.
    #[error("resonance at |xi| = {xi_norm} (det = {det:e})")]
    Resonance { xi_norm: f64, det: f64 },

    /// Grid, model or geometry violates a configuration invariant.
    #[error("configuration error: {0}")]
    Config(String),

    /// The discrete Lippmann-Schwinger system is singular or badly conditioned.
    #[error("solvability error at omega = {omega}: {detail}")]
    Solvability { omega: f64, detail: String },

    /// An iterative method hit its iteration cap.
    #[error("convergence error after {iterations} iterations (residual {residual:e}): {detail}")]
    Convergence {
        iterations: usize,
        residual: f64,
        detail: String,
    },

    /// Mismatched shapes or inconsistent inputs.
    #[error("input error: {0}")]
    Input(String),

    /// A curve fit could not be carried out (degenerate data).
    #[error("fit error: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
