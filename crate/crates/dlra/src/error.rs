use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty matrix")]
    EmptyMatrix,

    #[error("non-finite input")]
    NonFiniteInput,

    #[error("dimension mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("rank {r} exceeds matrix dimensions {rows}x{cols}")]
    RankExceedsDimensions { r: usize, rows: usize, cols: usize },

    #[error("rank must be at least 1")]
    ZeroRank,

    #[error("non-integer step count: ({t_final} - {t0}) / {h} is not within 1e-9 of a positive integer")]
    NonIntegerStepCount { t0: f64, t_final: f64, h: f64 },

    #[error("blow-up at stage {stage}{}", .step.map(|k| format!(" (step {k})")).unwrap_or_default())]
    BlowUp { stage: usize, step: Option<usize> },

    #[error("unknown tableau '{name}'; available: {}", .available.join(", "))]
    UnknownTableau { name: String, available: Vec<String> },

    #[error("invalid tableau '{name}': {}", .violations.join("; "))]
    InvalidTableau { name: String, violations: Vec<String> },

    #[error("insufficient data: {0}")]
    InsufficientData(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("mesh too small: n = {0} (need n >= 4)")]
    MeshTooSmall(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
