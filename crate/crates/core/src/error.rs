use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Precondition failures (bad arguments, empty neighborhoods, degenerate
/// designs) are distinguished from internal-consistency failures so the CLI
/// can map them onto different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Rejection sampling accepted (almost) nothing: the region has
    /// numerically zero measure at this scale.
    #[error("empty region: acceptance rate {acceptance:.3e} over {trials} trials")]
    EmptyRegion { acceptance: f64, trials: usize },

    #[error("rank-deficient design: achieved rank {rank} of {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("corpus inconsistency: {0}")]
    CorpusInconsistency(String),

    #[error("internal consistency violated: {0}")]
    InternalConsistency(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InternalConsistency(_) | Error::CorpusInconsistency(_) => 3,
            _ => 2,
        }
    }
}
