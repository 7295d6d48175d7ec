use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("frame {frame}, part {part}: {message}")]
    InvalidPart { frame: u32, part: u32, message: String },

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("histogram length mismatch ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("brute-force oracle refused: {vertices} vertices exceeds limit of {limit}")]
    OracleTooLarge { vertices: usize, limit: usize },

    #[error("infeasible generator spec: {0}")]
    InfeasibleSpec(String),

    #[error("evaluation: {0}")]
    Evaluation(String),

    #[error("plot: {0}")]
    Plot(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
