use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("inverse temperature must be positive, got {0}")]
    InvalidBeta(f64),

    #[error("grid size {got} is below the minimum of {min}")]
    GridTooSmall { got: usize, min: usize },

    #[error("invalid integrator configuration: {0}")]
    InvalidIntegrator(String),

    #[error("non-finite state at step {step} of replica {replica}")]
    NonFiniteState { replica: u64, step: usize },

    #[error("rejection sampler gave up after {0} consecutive rejections")]
    RejectionCapExceeded(usize),

    #[error("log-weight {log_weight:.3} at alpha = {alpha} exceeds the representable range")]
    WeightOverflow { alpha: f64, log_weight: f64 },

    #[error("expected samples from {expected} dynamics, got {found}")]
    ProvenanceMismatch { expected: String, found: String },

    #[error("alpha grid must be finite and strictly increasing")]
    UnsortedAlphas,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("degenerate denominator: F''(0) = {f2:.6e} is not above 3 standard errors ({se2:.6e})")]
    DegenerateDenominator { f2: f64, se2: f64 },

    #[error("reference second moment is zero")]
    ZeroSecondMoment,

    #[error("least-squares design matrix is rank deficient")]
    RankDeficient,

    #[error("log-log fit needs strictly positive abscissae and ordinates of one sign")]
    SignViolation,

    #[error("mismatched lengths: {0}")]
    LengthMismatch(String),

    #[error("replicas do not share a checkpoint grid")]
    CheckpointMismatch,

    #[error("right-hand side is not centered: E_mu[phi] = {0:.3e}")]
    NotCentered(f64),

    #[error("model has no one-dimensional reduction")]
    NotSeparable,

    #[error("spectral grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("unknown figure `{0}`")]
    UnknownFigure(String),

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error("replica {replica} failed: {source}")]
    Replica {
        replica: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
