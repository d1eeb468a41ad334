use thiserror::Error;

pub type Result<T, E = SolverError> = std::result::Result<T, E>;

/// Failures raised by the numerical layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("singular matrix: pivot {pivot:e} at column {column} is below floor {floor:e}")]
    SingularMatrix { column: usize, pivot: f64, floor: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFiniteValue(&'static str),

    #[error("initialization failed: {0}")]
    InitializationFailed(String),

    #[error("all {variants} variants inadmissible (best residual {best_residual:e}, threshold {threshold:e})")]
    AllVariantsInadmissible {
        variants: usize,
        best_residual: f64,
        threshold: f64,
    },

    #[error("invalid problem parameters: {0}")]
    InvalidParams(String),
}

pub(crate) fn ensure_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(SolverError::DimensionMismatch { expected, found })
    }
}

pub(crate) fn ensure_finite(values: &[f64], context: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SolverError::NonFiniteValue(context))
    }
}
