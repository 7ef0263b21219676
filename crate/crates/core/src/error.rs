use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    RejectedInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error(
        "profile derivative unavailable: sampled profile has {points} grid points, need at least 4"
    )]
    DerivativeUnavailable { points: usize },

    #[error("argument {value} outside the domain {domain}")]
    OutOfDomain { value: f64, domain: &'static str },

    #[error("propagation diverged at step {step}")]
    PropagationDiverged { step: usize },

    #[error("contour degenerate: |f| = {modulus:e} below {threshold:e} at z = {re} + {im}i")]
    ContourDegenerate {
        re: f64,
        im: f64,
        modulus: f64,
        threshold: f64,
    },

    #[error("winding not resolvable: refinement depth exceeded near z = {re} + {im}i")]
    NonResolvableWinding { re: f64, im: f64 },

    #[error("1 is a conjugate instant: |det b_1| = {det:e} against scale {scale:e}")]
    EndpointConjugate { det: f64, scale: f64 },

    #[error("Galerkin matrix degenerate at t = {t}: {n_zero} zero pivots")]
    EndpointDegenerate { t: f64, n_zero: usize },

    #[error("inertia difference did not stabilize; history {history:?}")]
    StabilizationFailure { history: Vec<(usize, i64)> },

    #[error("crossing forms irregular for every tried shift {deltas:?}")]
    CrossingIrregular { deltas: Vec<f64> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error signals a violated hypothesis of the index theorem
    /// rather than a numerical failure.
    pub fn is_endpoint_conjugate(&self) -> bool {
        matches!(
            self,
            Error::EndpointConjugate { .. } | Error::EndpointDegenerate { .. }
        )
    }
}
