use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("lateral weight matrix is not symmetric at ({row}, {col})")]
    AsymmetricLateral { row: usize, col: usize },

    #[error("lateral weight matrix has a nonzero diagonal entry at index {0}")]
    NonzeroLateralDiagonal(usize),

    #[error("{name} must be positive, got {value}")]
    NonpositiveTemperature { name: &'static str, value: f64 },

    #[error("non-finite entry in {0}")]
    NonfiniteEntry(&'static str),

    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("coordinate {value} does not fit in {bits} bits")]
    CoordinateOutOfRange { value: u64, bits: u32 },

    #[error("row length {found} does not match {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("{units} units is too many to enumerate (limit {limit})")]
    TooLargeToEnumerate { units: usize, limit: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("batch is empty")]
    EmptyBatch,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("percentile {0} is outside the open interval (0, 100)")]
    PercentileOutOfRange(f64),

    #[error("placement infeasible: {0}")]
    PlacementInfeasible(String),

    #[error("invalid sweep plan: {0}")]
    InvalidPlan(String),
}
