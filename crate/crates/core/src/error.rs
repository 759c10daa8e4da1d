use thiserror::Error;

/// Faults raised while loading datasets.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("wrong magic in {path}: expected {expected:#010x}, found {found:#010x}")]
    WrongMagic {
        path: String,
        expected: u32,
        found: u32,
    },
    #[error("truncated file {path}: expected {expected} bytes, found {found}")]
    Truncated {
        path: String,
        expected: usize,
        found: usize,
    },
    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("{path}: size {size} is not a multiple of the {record}-byte record")]
    RecordSize {
        path: String,
        size: usize,
        record: usize,
    },
    #[error("label {label} at index {index} is outside 0..=9")]
    BadLabel { index: usize, label: u8 },
    #[error("class {class} has {available} samples, {requested} requested")]
    InsufficientClass {
        class: u8,
        available: usize,
        requested: usize,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Faults raised while reading or writing checkpoints.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("spec hash mismatch: checkpoint {checkpoint}, expected {expected}")]
    HashMismatch { checkpoint: String, expected: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("numerical divergence in {layer} at neuron {neuron} (value {value})")]
    Divergence {
        layer: &'static str,
        neuron: usize,
        value: f64,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("degenerate neuron {neuron}: incoming weights have zero mean")]
    ZeroMean { neuron: usize },
    #[error("degenerate kernel {channel}: weights have zero standard deviation")]
    ZeroStd { channel: usize },
    #[error("threshold must be positive, got {0}")]
    NonPositiveThreshold(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
