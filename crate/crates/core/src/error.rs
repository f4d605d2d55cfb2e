use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite state")]
    NonFiniteState,

    #[error("trajectory diverged at step {step}")]
    Diverged { step: usize },

    #[error("trajectory diverged for sample {sample}, variable {variable} at step {step}")]
    TransformDiverged {
        sample: usize,
        variable: usize,
        step: usize,
    },

    #[error("invalid attractor spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("zero variance column {column}")]
    ZeroVariance { column: usize },

    #[error("constant target cannot be rescaled")]
    ConstantTarget,

    #[error("empty partition: {0}")]
    EmptyPartition(String),

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("no valid neighbor pairs for the divergence curve")]
    NoNeighborPairs,

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("dataset not found: {0}")]
    MissingData(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(offset: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: msg.into(),
        }
    }

    /// True for errors caused by bad user data rather than bad configuration
    /// or numerical failure.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Io(_)
                | Error::Csv(_)
                | Error::ZeroVariance { .. }
                | Error::MissingData(_)
                | Error::InvalidInput(_)
                | Error::ConstantTarget
                | Error::EmptyPartition(_)
        )
    }

    /// True for numerical failures (divergence, singular systems).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteState
                | Error::Diverged { .. }
                | Error::TransformDiverged { .. }
                | Error::Singular(_)
                | Error::NoNeighborPairs
        )
    }
}
