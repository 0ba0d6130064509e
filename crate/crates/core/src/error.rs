use thiserror::Error;

use crate::io_dynamics::PumpSearchFailure;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The bias current reached the critical current where L_k(I) diverges.
    #[error("current {current:.6e} A reaches the critical current I* = {critical:.6e} A")]
    Divergence { current: f64, critical: f64 },

    /// Evaluation too close to a pole of the cavity response.
    #[error("singular response: {0}")]
    Singularity(String),

    /// The pumped cavity is beyond the parametric threshold.
    #[error("self-oscillation regime: |xi| = {xi_mag:.6e} rad/s exceeds threshold {threshold:.6e} rad/s")]
    SelfOscillation { xi_mag: f64, threshold: f64 },

    /// Normal matrix of a fit is singular or the design is degenerate.
    #[error("rank-deficient fit: {0}")]
    Rank(String),

    #[error("fit error: {0}")]
    Fit(String),

    /// A figure of merit could not be read off a curve.
    #[error("extraction failed: {0}")]
    Extraction(String),

    #[error("pump search failed: {0}")]
    SearchFailed(Box<PumpSearchFailure>),

    /// Inversion target lies outside the attainable range.
    #[error("inversion failed: {0}")]
    Inversion(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
