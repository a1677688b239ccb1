use thiserror::Error;

use crate::trainer::TrainTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid architecture: {0}")]
    Architecture(String),

    #[error("invalid label {0}: logistic loss needs y in {{-1, +1}}")]
    InvalidLabel(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate sample size: {0}")]
    DegenerateSample(String),

    #[error("process exploded at t = {t}: {reason}")]
    Explosion { t: usize, reason: String },

    #[error("unstable GEXPAR parameters: spectral radius {spectral_radius:.6} >= 1")]
    Unstable { spectral_radius: f64 },

    #[error("model contract violated: {0}")]
    ModelContract(String),

    #[error("training failed: all {runs} runs diverged")]
    TrainingFailed { runs: usize, trace: Box<TrainTrace> },

    #[error("no held-out windows fell inside the unit cube")]
    EstimationSupport,

    #[error("degenerate construction: {0}")]
    DegenerateConstruction(String),

    #[error("packing search exhausted after {tried} candidates with {found} of {needed} words")]
    PackingFailed {
        tried: usize,
        found: usize,
        needed: usize,
    },

    #[error("probe failure: {0}")]
    ProbeFailure(String),

    #[error("insufficient points for a slope fit: {0}")]
    InsufficientPoints(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Architecture(_)
            | Error::Shape { .. }
            | Error::InvalidLabel(_)
            | Error::Domain(_)
            | Error::Json(_)
            | Error::Io(_)
            | Error::Csv(_) => 2,
            _ => 3,
        }
    }
}
