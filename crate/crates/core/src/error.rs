use alloc::string::String;

/// Errors produced by the decomposition library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid mode {0}: expected 1, 2 or 3")]
    InvalidMode(usize),

    #[error("rank {rank} exceeds dimension {dim} of mode {mode}")]
    RankTooLarge { rank: usize, dim: usize, mode: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no missing direction available: {0}")]
    NoMissingDirection(String),

    #[error("no improvement direction: {0}")]
    NoDirection(String),

    #[error("direction has zero norm")]
    ZeroDirection,

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("non-finite objective value at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("no feasible schedule: {0}")]
    InfeasibleSchedule(String),
}

pub type Result<T> = core::result::Result<T, Error>;
