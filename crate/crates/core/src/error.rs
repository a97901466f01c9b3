use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid signal spec: {0}")]
    InvalidSpec(String),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("length mismatch: expected {expected} multipliers, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid label-noise spec: {0}")]
    InvalidNoise(String),
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("non-finite gradient at step {step}: {detail}")]
    NonFinite { step: usize, detail: String },
    #[error("coefficient update for step {got} applied to state at step {expected}")]
    StepMismatch { expected: usize, got: usize },
    #[error("sample index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("refusing to overwrite existing manifest at {0} (use --force)")]
    ManifestExists(String),
    #[error("malformed file {path}: {message}")]
    Malformed { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
