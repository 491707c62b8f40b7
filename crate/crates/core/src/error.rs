use thiserror::Error;

/// Errors produced by the estimation pipeline and its I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("SVD did not converge after {iterations} iterations")]
    SvdNonConvergence { iterations: usize },

    #[error(
        "no information gain: posterior variance {post_var:e} is not below prior variance {pri_var:e}"
    )]
    NoInformationGain { post_var: f64, pri_var: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("quadrature error estimate {estimate:e} exceeds target {target:e}")]
    Quadrature { estimate: f64, target: f64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("degenerate design at sigma = {sigma}: all noisy inputs identical")]
    DegenerateDesign { sigma: f64 },

    #[error("no weight defined for sigma = {sigma}")]
    MissingWeight { sigma: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed tensor file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

pub(crate) fn ensure_finite(context: impl FnOnce() -> String, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context: context() })
    }
}
