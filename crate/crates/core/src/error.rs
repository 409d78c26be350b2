use num_complex::Complex64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operator is not Hermitian (max |M - M^H| = {0:.3e})")]
    NotHermitian(f64),

    #[error(
        "spectral parameter {xi} lies within {distance:.3e} of eigenvalue {eigenvalue} \
         (required separation {eta:.3e})"
    )]
    TooCloseToSpectrum {
        xi: Complex64,
        eigenvalue: f64,
        distance: f64,
        eta: f64,
    },

    #[error("fugacity z = {z} is outside the admissible domain: {reason}")]
    Fugacity { z: f64, reason: String },

    #[error("contour encloses the logarithm branch point {0}")]
    BranchPointEnclosed(Complex64),

    #[error("contour rejected: {0}")]
    Contour(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("problem size guard: {0}")]
    SizeGuard(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
