use thiserror::Error;

/// Errors produced by the analysis engine and the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates the documented precondition of an operation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The inputs are valid numbers but fall outside the region where the
    /// entangling-cloner model is defined (for instance `eta = 1` with
    /// nonzero excess noise).
    #[error("model domain error: {0}")]
    ModelDomain(String),

    /// An iterative numerical routine stopped before reaching its tolerance.
    #[error("no convergence in {routine}: estimate {estimate:e}, error {error:e} (target {target:e})")]
    NonConvergence {
        routine: &'static str,
        estimate: f64,
        error: f64,
        target: f64,
    },

    /// The excess noise is above the threshold where the asymptotic kept
    /// region closes.
    #[error("no secure asymptotes at eta = {eta}, xi = {xi}: noise above threshold")]
    NoSecureAsymptotes { eta: f64, xi: f64 },

    /// A root-finding bracket does not contain a sign change.
    #[error("bracket [{lo}, {hi}] does not contain a root")]
    Bracket { lo: f64, hi: f64 },

    /// A spectrum or probability vector failed a consistency check.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
