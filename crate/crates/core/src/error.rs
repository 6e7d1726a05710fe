use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("vector is not tangent at the base point (residual {residual:.3e})")]
    NotTangent { residual: f64 },

    #[error("points lie on each other's cut locus (p·q = {dot:.12})")]
    CutLocus { dot: f64 },

    #[error("matrix is not skew-symmetric (asymmetry {0:.3e})")]
    NotSkew(f64),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("degenerate landmark configuration: {0}")]
    Degenerate(String),

    #[error("log map did not converge after {iterations} iterations (residual {residual:.3e})")]
    LogNotConverged { iterations: usize, residual: f64 },

    #[error("Fréchet mean did not converge after {iterations} iterations (step {step:.3e})")]
    MeanNotConverged { iterations: usize, step: f64 },

    #[error("at time index {index}: {source}")]
    AtTimeIndex {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("observation {index}: {source}")]
    AtObservation {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("manifold invariant '{name}' drifted by {residual:.3e}")]
    InvariantDrift { name: &'static str, residual: f64 },

    #[error("data variance is zero; R² is undefined")]
    ZeroVariance,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_time(self, index: usize) -> Error {
        match self {
            e @ Error::AtTimeIndex { .. } => e,
            e => Error::AtTimeIndex {
                index,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn at_observation(self, index: usize) -> Error {
        Error::AtObservation {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
