use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an API precondition (shape mismatch, wrong grid).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("time increment {dt} is not a positive integer multiple of the grid spacing {delta_a}")]
    StepSize { dt: f64, delta_a: f64 },

    /// Γ_D ≤ 0 for a nonzero state, so the coupling weight is undefined.
    #[error("degenerate coupling weight: gamma_d = {gamma_d:e}")]
    DegenerateWeight { gamma_d: f64 },

    #[error("admissibility lost at t = {time}: gamma_d = {gamma_d:e} below floor {floor:e}")]
    AdmissibilityLoss { time: f64, gamma_d: f64, floor: f64 },

    #[error("mass leaked past a_max at t = {time}: {leaked:e} exceeds threshold {threshold:e}")]
    OverflowLeak { time: f64, leaked: f64, threshold: f64 },

    #[error("fixed-point iteration did not contract within {iterations} iterations (last update {last_update:e})")]
    NonContraction { iterations: usize, last_update: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("state cannot be projected onto P = 0: {0}")]
    Unprojectable(String),

    #[error("inadmissible state: {0}")]
    Inadmissible(String),

    #[error("config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },

    /// A run stopped early; the trajectory up to the failure is kept.
    #[error("run aborted at t = {}: {reason}", partial.end_time())]
    Aborted {
        reason: Box<Error>,
        partial: Box<crate::stepper::TrajectoryRecord>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// The underlying cause, looking through an abort wrapper.
    pub fn root(&self) -> &Error {
        match self {
            Error::Aborted { reason, .. } => reason.root(),
            e => e,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
