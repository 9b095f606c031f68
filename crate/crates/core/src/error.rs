// SPDX-License-Identifier: Apache-2.0
use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("unstable dynamics: spectral abscissa {abscissa:.6e} is not below -{tol:.1e}, no steady state exists")]
    Unstable { abscissa: f64, tol: f64 },

    #[error("ill-conditioned: A*(N-1) = {value:.4} exceeds the cap {cap}; use the closed-form oracle paths instead")]
    IllConditioned { value: f64, cap: f64 },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("residual check failed in {context}: {residual:.3e} > {tol:.1e}")]
    Residual {
        context: &'static str,
        residual: f64,
        tol: f64,
    },

    #[error("eigenvalue solver failed: {0}")]
    EigenSolver(String),

    #[error("divergent series: |eps0 * h^-1_NN| = {ratio:.4e} is not below 1")]
    DivergentSeries { ratio: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("zero-photon drive: the total photon number vanishes (beta = 0)")]
    ZeroPhotonDrive,

    #[error("time step too coarse: {0}")]
    StepTooCoarse(String),

    #[error("config error at line {line}, key `{key}`: {message}")]
    Config {
        key: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn mismatch(
    context: &'static str,
    expected: impl ToString,
    found: impl ToString,
) -> Error {
    Error::DimensionMismatch {
        context,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
