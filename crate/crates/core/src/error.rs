use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: parse error: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: format error: {msg}")]
    Format { line: usize, msg: String },

    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("NaN input to {0}")]
    Nan(&'static str),

    #[error(
        "step sizes violate the admissibility bound at coordinate {coord}: tau = {tau:e} >= {bound:e}"
    )]
    Inadmissible { coord: usize, tau: f64, bound: f64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
