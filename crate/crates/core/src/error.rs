use thiserror::Error;

use crate::model::DemandVector;

#[derive(Debug, Error)]
pub enum Error {
    #[error("symbol width mismatch: {left} vs {right} bits")]
    WidthMismatch { left: usize, right: usize },

    #[error("subfile symbols must be at least one bit wide")]
    ZeroWidth,

    #[error("demand entry {entry} is out of range for {n_files} files")]
    DemandOutOfRange { entry: usize, n_files: usize },

    #[error("demand {0} is not served by this scheme")]
    DemandNotServed(DemandVector),

    #[error("cache fraction {0} does not split files into whole subfiles")]
    NonIntegralSplit(String),

    #[error("incompatible parameters: {0}")]
    ParameterMismatch(String),

    #[error("enumeration needs {required} atoms, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("decoding failed: {0}")]
    Decode(String),

    #[error("descriptor: {0}")]
    Descriptor(String),

    #[error("search budget of {trials} restarts exhausted without a witness")]
    SearchExhausted { trials: u64 },

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("session decode mismatch for users {users:?}")]
    SessionMismatch {
        users: Vec<usize>,
        transcript: Box<crate::session::SessionTranscript>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
