use thiserror::Error;

#[derive(Debug, Error)]
pub enum LaraError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("operator registration error: {0}")]
    OpRegistration(String),
    #[error("ext contract error: {0}")]
    ExtContract(String),
    #[error("join support is unbounded: {0}")]
    UnboundedJoin(String),
    #[error("table is not decomposable: {0}")]
    NotDecomposable(String),
    #[error("division error: {0}")]
    Division(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LaraError>;

impl LaraError {
    pub fn schema(msg: impl Into<String>) -> LaraError {
        LaraError::Schema(msg.into())
    }

    pub fn eval(msg: impl Into<String>) -> LaraError {
        LaraError::Eval(msg.into())
    }
}
