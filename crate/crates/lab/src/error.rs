use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config field `{field}`: {message}")]
    Field { field: String, message: String },

    #[error("trial minimum not met: {0}")]
    Minimum(String),

    #[error("io: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] papr_core::Error),

    #[error("csv: {0}")]
    Csv(String),
}
