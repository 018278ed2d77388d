use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("bit sequence of length {len} is not a multiple of {multiple} bits per symbol")]
    BitLength { len: usize, multiple: usize },

    #[error("bit value {0} at index {1} is not 0 or 1")]
    InvalidBit(u8, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("no frame found: correlation peak {peak:.4} below {threshold:.4}")]
    NoFrameFound { peak: f64, threshold: f64 },

    #[error("unknown scenario {name:?}; valid names: {valid}")]
    UnknownScenario { name: String, valid: String },

    #[error("unknown modulation {0:?}; valid: qpsk, 16psk, 64psk")]
    UnknownScheme(String),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("least-squares system is rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("canceller has not been trained")]
    Untrained,

    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },

    #[error("shape mismatch for {name}: expected {expected}, found {found}")]
    ShapeMismatch {
        name: String,
        expected: String,
        found: String,
    },

    #[error("invalid scenario config: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
