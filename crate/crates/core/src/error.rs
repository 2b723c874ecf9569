use thiserror::Error;

use crate::numkit::DenseMatrix;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty shape: {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error(
        "conjugate gradient failed after {iterations} iterations \
         (relative residual {relative_residual:.3e}, condition estimate {condition_estimate:.3e})"
    )]
    CgFailure {
        iterations: usize,
        relative_residual: f64,
        condition_estimate: f64,
    },

    #[error("gram matrix is ill-conditioned (condition estimate {condition_estimate:.3e})")]
    IllConditioned { condition_estimate: f64 },

    #[error("hermite quadrature did not converge: coefficient {order} moved by {change:.3e}")]
    Quadrature { order: usize, change: f64 },

    #[error("training diverged at step {step}")]
    TrainingDiverged { step: usize },

    #[error("reconstruction diverged at iteration {iteration}")]
    ReconDiverged {
        iteration: usize,
        last_good: Option<Box<DenseMatrix>>,
    },

    #[error("negative reconstruction loss {loss:.3e} beyond solver noise")]
    NegativeLoss { loss: f64 },

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("class {class} has {found} records, {needed} needed")]
    InsufficientClass {
        class: u8,
        found: usize,
        needed: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
