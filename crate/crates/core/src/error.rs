use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("order {0} is not supported (expected an even order >= 2)")]
    InvalidOrder(usize),

    #[error("no sign change of the implicit function between the bracket endpoints")]
    NoSignChange,

    #[error("root finder did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(&'static str),

    #[error("zero-length segment")]
    ZeroLengthSegment,

    #[error("interface is under-resolved at {at}: {reason}")]
    UnderResolved { at: String, reason: String },

    #[error("domain too small: n = {n} cells per side, need at least {min}")]
    DomainTooSmall { n: usize, min: usize },

    #[error("neighborhood of cell ({i}, {j}) has {found} members, need {needed}")]
    InsufficientNeighbors {
        i: i64,
        j: i64,
        found: usize,
        needed: usize,
    },

    #[error("moment matrix is rank deficient: rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("moment of order {0} requested but geometry only has order {1}")]
    MissingMoment(usize, usize),

    #[error("face flux stencils disagree on orientation for face {0}")]
    OrientationMismatch(String),

    #[error("linear system is singular")]
    SingularSystem,

    #[error("solver did not reach relative residual {tol:e} (achieved {achieved:e})")]
    SolverNoConvergence { tol: f64, achieved: f64 },

    #[error("unknown geometry '{0}'")]
    UnknownGeometry(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
