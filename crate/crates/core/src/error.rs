use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scale level {0} outside supported range 4..=12")]
    UnsupportedScale(u32),
    #[error("radius {radius} below grid resolution {delta}")]
    RadiusBelowResolution { radius: f64, delta: f64 },
    #[error("invalid radius {0}: must be a dyadic multiple of delta in [delta, 8]")]
    InvalidRadius(f64),
    #[error("zero vector has no dual line")]
    InvalidDual,
    #[error("line passes through the origin and has no dual point")]
    NoDualRepresentation,
    #[error("horizontal line has no x = a*y + b form")]
    NoSlopeIntercept,
    #[error("point lies on the excluded line y = 0")]
    OnExcludedLine,
    #[error("cell ({0}, {1}) is not in the union set")]
    NotInUnion(u32, u32),
    #[error("mismatched scales: {0} vs {1}")]
    ScaleMismatch(u32, u32),
    #[error("construction failed: {0}")]
    ConstructionFailure(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("insufficient data: need at least {needed} distinct scales, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("nothing in band [{0}, {1}]")]
    NothingInBand(f64, f64),
    #[error("pipeline degenerate at stage `{0}`")]
    Degenerate(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
