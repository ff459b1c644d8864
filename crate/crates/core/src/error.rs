use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad {what} file: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("empty input")]
    EmptyInput,

    #[error("duplicate field name `{0}`")]
    DuplicateField(String),

    #[error("field {field} out of range (n = {n})")]
    FieldOutOfRange { field: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}; learning rate too high?")]
    Diverged { epoch: usize, batch: usize },

    #[error("metric needs both positive and negative labels")]
    SingleClass,

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn format_err(what: &'static str, detail: impl Into<String>) -> Error {
    Error::Format {
        what,
        detail: detail.into(),
    }
}
