use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("row {row}: negative rainfall value {value}")]
    NegativeValue { row: usize, value: f64 },

    #[error("row {row}: time step {found_secs}s differs from grid step {expected_secs}s")]
    NonUniformGrid {
        row: usize,
        expected_secs: i64,
        found_secs: i64,
    },

    #[error("series has {count} missing observations, first at row {first_row}; enable zero filling to accept")]
    Gaps { count: usize, first_row: usize },

    #[error("series too short: {len} observations, need at least {needed}")]
    TooShort { len: usize, needed: usize },

    #[error("series has zero variance, autocorrelation undefined")]
    ZeroVariance,

    #[error("seasonality is non-positive (S = {value}) at month-time {t}")]
    NonPositiveSeasonality { t: f64, value: f64 },

    #[error("singular least-squares design at order {order}")]
    SingularDesign { order: usize },

    #[error("autoregressive and moving-average polynomials share the root {root}")]
    CommonRoot { root: f64 },

    #[error("moving-average factorisation failed: {0}")]
    Factorization(String),

    #[error("ARMA model is not causal and invertible")]
    NonInvertible,

    #[error("tilt {argument} reaches the exponential moment bound {bound}")]
    MomentBound { argument: f64, bound: f64 },

    #[error("quadrature did not converge: error estimate {error:e} exceeds tolerance {tolerance:e}")]
    Quadrature { error: f64, tolerance: f64 },

    #[error("optimiser did not converge after {iterations} iterations (best objective {best})")]
    NoConvergence { iterations: usize, best: f64 },

    #[error("moment equations have no solution with kappa in (1, 2): {0}")]
    NoMomentSolution(String),

    #[error("root not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NotBracketed { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("{failed} of {total} bootstrap replicates failed to fit")]
    BootstrapFailures { failed: usize, total: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Factorization(_)
                | Error::Quadrature { .. }
                | Error::NoConvergence { .. }
                | Error::NoMomentSolution(_)
                | Error::NotBracketed { .. }
                | Error::BootstrapFailures { .. }
                | Error::SingularDesign { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
