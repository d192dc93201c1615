use thiserror::Error;

/// Errors raised by the workbench.
///
/// Input problems (bad dimensions, out-of-domain parameters, malformed
/// schemas) are distinguished from numerical failures so that callers can map
/// them onto different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid of size {grid} is too small for a Fourier window of width {width} (need at least {required})")]
    GridTooSmall {
        grid: usize,
        width: usize,
        required: usize,
    },

    #[error("truncation degree {requested} leaves a tail of {tail:.3e}; the smallest admissible degree is {required}")]
    TruncationTooSmall {
        requested: usize,
        required: usize,
        tail: f64,
    },

    #[error("expected an analytic function, found negative Fourier mass {mass:.3e}")]
    NotAnalytic { mass: f64 },

    #[error("vector is not in the kernel: relative residual {residual:.3e} exceeds {tol:.3e}")]
    NotInKernel { residual: f64, tol: f64 },

    #[error("window budget violated: output needs degree {required}, window allows {available}")]
    WindowBudget { required: i64, available: i64 },

    #[error(
        "near-invariance certification failed: residual {residual:.3e} exceeds {threshold:.3e}"
    )]
    CertificationFailed { residual: f64, threshold: f64 },

    #[error("degenerate decomposition: rank deficiency at degree {degree}")]
    Degenerate { degree: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by the caller's input rather than by a failing
    /// numerical routine.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::Numerical(_) | Error::Degenerate { .. } | Error::CertificationFailed { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
