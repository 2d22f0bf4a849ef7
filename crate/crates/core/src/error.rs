use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("duplicate OAM charge {0} (pass allow_degenerate to permit)")]
    DuplicateCharge(i64),
    #[error("all amplitudes are zero")]
    ZeroAmplitudes,
    #[error("axis {axis} out of range for d={d}")]
    AxisOutOfRange { axis: usize, d: usize },
    #[error("invalid axis: {0}")]
    InvalidAxis(String),
    #[error("unit field degenerate: |m| vanishes on {fraction:.3} of the grid")]
    DegenerateField { fraction: f64 },
    #[error("quadrature did not converge: error {error:.3e} (raw {raw:.6})")]
    NonConvergent { raw: f64, error: f64 },
    #[error("unknown triple label {0:?}")]
    UnknownLabel(String),
    #[error("mode/dimension mismatch: {0}")]
    ModeMismatch(String),
    #[error("similarity undefined for a zero vector")]
    ZeroVector,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("all coincidence counts are zero")]
    ZeroCounts,
    #[error("reconstruction did not converge: chi2 {chi2:.6e} after {iterations} iterations")]
    ReconstructionNonConvergent { chi2: f64, iterations: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Numerical failures map to exit code 2 in the CLI, everything else to 1.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergent { .. } | Error::ReconstructionNonConvergent { .. }
        )
    }
}
