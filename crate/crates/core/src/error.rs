use thiserror::Error;

/// Errors raised anywhere in the kernel pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    Size(String),

    #[error("qubit index {index} out of range for a {n_qubits}-qubit state")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_sample(self, index: usize) -> Self {
        Error::Sample {
            index,
            source: Box::new(self),
        }
    }

    /// Coarse category used by front ends to map errors onto exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => ErrorKind::Config,
            Error::Data(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => ErrorKind::Data,
            Error::Sample { source, .. } => source.kind(),
            Error::Size(_)
            | Error::QubitIndex { .. }
            | Error::Dimension { .. }
            | Error::Encoding(_)
            | Error::Numerical(_) => ErrorKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

pub type Result<T> = std::result::Result<T, Error>;
