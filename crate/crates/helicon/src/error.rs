//! Error types for every analysis stage.

use thiserror::Error;

/// Errors raised while decoding or encoding Standard MIDI Files.
#[derive(Debug, Error)]
pub enum MidiError {
    #[error("bad header: {0}")]
    BadHeader(&'static str),
    #[error("bad chunk: {0}")]
    BadChunk(String),
    #[error("malformed variable-length quantity")]
    MalformedVlq,
    #[error("SMPTE division is not supported; only ticks-per-quarter-note timing")]
    UnsupportedDivision,
    #[error("unsupported SMF format {0}; only formats 0 and 1")]
    UnsupportedFormat(u16),
}

/// Errors raised by spiral-array geometry.
#[derive(Debug, Error)]
pub enum SpiralError {
    #[error("center of effect of an empty cloud is undefined")]
    EmptyCloud,
    #[error("invalid spiral parameters: {0}")]
    BadParams(String),
}

/// Errors raised by key-index estimation, spelling, and key detection.
#[derive(Debug, Error)]
pub enum TonalError {
    #[error("no non-drum notes to analyze")]
    NoNotes,
    #[error(transparent)]
    Spiral(#[from] SpiralError),
}

/// Errors raised by feature extraction, forest training, and model files.
#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("track has no non-drum notes")]
    EmptyTrack,
    #[error("training data contains only one class for role {0}")]
    DegenerateData(&'static str),
    #[error("feature vector length {got} does not match model input size {want}")]
    DimensionMismatch { want: usize, got: usize },
    #[error("bad model file: {0}")]
    BadModelFile(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Errors raised while reading a configuration file.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Spiral(#[from] SpiralError),
}
