use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max |M - M^dagger| = {0:e})")]
    NotHermitian(f64),

    #[error("ket is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("state is not physical: {0}")]
    Unphysical(String),

    #[error("parameter `{name}` = {value} is outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("missing tomography settings: {}", .0.join(", "))]
    MissingSettings(Vec<String>),

    #[error("degenerate fit design: {0}")]
    DegenerateFit(String),

    #[error("no violation at this visibility: v = {0} is not above 1/sqrt(2)")]
    NoViolation(f64),

    #[error("infeasible calibration targets: {0}")]
    Infeasible(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_range(name: &'static str, value: f64, min: f64, max: f64) -> Result<()> {
    if value.is_finite() && value >= min && value <= max {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            min,
            max,
        })
    }
}
