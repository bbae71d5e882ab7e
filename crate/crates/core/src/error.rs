use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("derivative of order {requested} requested, density provides up to order {available}")]
    UnsupportedOrder { requested: u32, available: u32 },

    #[error("matrix is not symmetric positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("grid too coarse: kernel scale {sigma:e} against spacing {spacing:e} on axis {axis}")]
    Resolution { sigma: f64, spacing: f64, axis: usize },

    #[error("non-finite value in {what} at {location:?}")]
    NonFinite { what: String, location: Vec<f64> },

    #[error("support mismatch: reference density {reference:e} but candidate vanishes at {location:?}")]
    SupportMismatch { location: Vec<f64>, reference: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate truncation: {0}")]
    DegenerateTruncation(String),

    #[error("atom {atom:?} lies outside every partition cell")]
    PartitionCoverage { atom: Vec<f64> },

    #[error("coverage trial {trial} at L1 distance {distance} exceeds {limit}; member: {member}")]
    CoverageFailure {
        trial: usize,
        distance: f64,
        limit: f64,
        member: String,
    },

    #[error("sampler diverged: {reason}; state: {state}")]
    Diverged { reason: String, state: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
