use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid coefficient family: {0}")]
    InvalidFamily(String),

    #[error("invalid weight function: {0}")]
    InvalidWeight(String),

    #[error("invalid history function: {0}")]
    InvalidHistory(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The weighted coefficient series has no finite bound.
    #[error("divergent tail: the weighted coefficient series has no finite bound")]
    Divergent,

    /// An explicit-list family was queried beyond the range its certificate covers.
    #[error("unknown tail: {0}")]
    UnknownTail(String),

    /// The history is not (certifiably) in the phase space F.
    #[error("history not in F: {0}")]
    NotInF(String),

    #[error("argument {theta} lies outside (-inf, 0]")]
    PositiveArgument { theta: f64 },

    #[error("time {t} is beyond the computed horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),
}
