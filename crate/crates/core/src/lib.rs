//! Anisotropic pseudodifferential calculus on space-time grids, with
//! solvers and diagnostics for fractional heat equations.
//!
//! The crate is organized around the anisotropic frequency weight
//! `{xi,tau} = (<xi>^{2d} + tau^2)^{1/(2d)}`: symbol classes and their
//! empirical certification ([`symbols`]), discrete operator application
//! ([`quantize`]), anisotropic function-space norms ([`spaces`]),
//! parabolic solves and parametrix experiments ([`parabolic`]), and the
//! restricted fractional Laplacian with Dirichlet condition on an
//! interval ([`dirichlet`]).

pub mod dirichlet;
pub mod parabolic;
pub mod quantize;
pub mod spaces;
pub mod symbols;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("ellipticity margin {margin:.3e} below threshold {threshold:.3e}")]
    NotElliptic { margin: f64, threshold: f64 },
    #[error("cost budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("assembly asymmetry {0:.3e} exceeds tolerance")]
    Asymmetry(f64),
    #[error("singular operator: {0}")]
    Singular(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
