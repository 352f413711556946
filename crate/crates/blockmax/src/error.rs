//! Crate-wide error types.

use thiserror::Error;

/// Shorthand for results carrying [`Error`].
pub type Result<T> = std::result::Result<T, Error>;

/// Why a single objective evaluation could not produce a usable pair.
///
/// Infeasible evaluations are data, not failures: the optimizer records them,
/// excludes them from surrogate training and from the archive, and moves on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InfeasibleReason {
    /// The expanded block counts produce fewer maxima than the configured floor.
    BlockCountBelowFloor { m: usize, floor: usize },
    /// A block count exceeds the lattice length along its dimension.
    SpecExceedsLattice { dim: usize, count: usize, len: usize },
    /// The maxima sample was constant; no scale parameter can be estimated.
    DegenerateSample,
    /// The parameter fit did not reach the gradient tolerance.
    FitDidNotConverge,
    /// The reference extreme is zero, so relative prediction error is undefined.
    ZeroReferenceExtreme,
}

impl std::fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::BlockCountBelowFloor { m, floor } => {
                write!(f, "block count {m} below floor {floor}")
            }
            Self::SpecExceedsLattice { dim, count, len } => {
                write!(f, "{count} blocks exceed lattice length {len} in dimension {dim}")
            }
            Self::DegenerateSample => write!(f, "constant maxima sample"),
            Self::FitDidNotConverge => write!(f, "parameter fit did not converge"),
            Self::ZeroReferenceExtreme => write!(f, "reference extreme is zero"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("parse error in {path} at {location}: {message}")]
    GridParse { path: String, location: String, message: String },

    #[error("region selector out of bounds: {0}")]
    SelectorOutOfBounds(String),

    #[error("invalid sample: {0}")]
    Sample(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("invalid problem definition: {0}")]
    Problem(String),

    #[error("infeasible evaluation: {0}")]
    Infeasible(InfeasibleReason),

    #[error("surrogate fit failed: {0}")]
    Surrogate(String),

    #[error("invalid optimizer configuration: {0}")]
    Config(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("baseline error: {0}")]
    Baseline(String),

    #[error("comparison refused: {0}")]
    Comparison(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("report format error: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
