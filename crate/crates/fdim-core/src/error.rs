//! Error types shared across the crate.

use thiserror::Error;

/// Unified error type for all fallible operations in the toolkit.
#[derive(Debug, Error)]
pub enum FdimError {
    /// Input file or stream does not match its declared layout.
    #[error("malformed input: {0}")]
    MalformedInput(String),

    /// Invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Operation contract violated by the caller (shape mismatch, empty input, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Two clips or tensors that must be aligned are not.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// Geometry requirement not met (undersized frame, bad crop, ...).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Non-finite value where a finite one is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// External tool missing or failed.
    #[error("dependency error: {0}")]
    Dependency(String),

    /// Curve fit failed to converge; carries best-so-far parameters and residual.
    #[error("fit did not converge (residual {residual}): {message}")]
    FitNonConvergence {
        message: String,
        params: Vec<f64>,
        residual: f64,
    },

    /// Degenerate data for a fit or statistic (zero variance, too few points).
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// Training aborted on a non-finite loss; diagnostics were dumped.
    #[error("non-finite loss at step {step}: diagnostics written to {dump_path}")]
    NonFiniteLoss { step: usize, dump_path: String },

    #[error("weight file error: {0}")]
    WeightFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, FdimError>;
