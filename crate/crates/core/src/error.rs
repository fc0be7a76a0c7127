use thiserror::Error;

#[derive(Debug, Error)]
pub enum LagError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid observation at row {row}: {reason}")]
    InvalidObservation { row: usize, reason: String },

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("quadrature did not reach tolerance: estimated relative error {rel_error:e}")]
    Quadrature { rel_error: f64 },

    #[error("MAP solver did not converge after {iterations} iterations (best z = {best_z}, |gradient| = {residual:e})")]
    NonConvergence {
        best_z: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("batch solve failed for {} row(s); first: row {}: {}", .0.len(), .0[0].0, .0[0].1)]
    Batch(Vec<(usize, LagError)>),

    #[error("need at least {needed} usable rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("length mismatch: {0}")]
    Length(String),

    #[error("{0}")]
    Parse(String),

    #[error("column `{name}` not found; available columns: {}", .available.join(", "))]
    ColumnNotFound {
        name: String,
        available: Vec<String>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LagError>;
