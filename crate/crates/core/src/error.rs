use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid angle {0} rad: separation angle must satisfy |phi| < pi")]
    InvalidAngle(f64),

    #[error("cannot normalize a zero-length vector")]
    ZeroVector,

    #[error("empty direction set")]
    EmptyDirections,

    #[error("{name} = {value} is outside its allowed range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("coincidence quad has zero total counts")]
    ZeroCounts,

    #[error("estimate has zero uncertainty; significance is undefined")]
    ZeroSigma,

    #[error("no violation region for these parameters")]
    EmptyRegion,

    #[error("angle grid has no non-zero entries")]
    DegenerateGrid,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("grid is not closed under negation (vertex {0} has no antipode)")]
    NotNegationClosed(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_range(name: &'static str, value: f64, lo: f64, hi: f64, range: &'static str) -> Result<()> {
    if value.is_nan() || value < lo || value > hi {
        return Err(Error::OutOfRange { name, value, range });
    }
    Ok(())
}
