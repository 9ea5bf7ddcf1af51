use thiserror::Error;

/// Which factor of a pseudo-block matrix failed a factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Inner,
    Mean,
}

impl std::fmt::Display for Factor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Factor::Inner => write!(f, "inner block"),
            Factor::Mean => write!(f, "mean block"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("singular {factor}: {detail}")]
    Singular { factor: Factor, detail: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("index {index} out of range 0..{len}")]
    Range { index: usize, len: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("config error at line {line} (key `{key}`): {message}")]
    Config {
        key: String,
        line: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
