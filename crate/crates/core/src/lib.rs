//! Componentwise intermediate order statistics of multivariate samples:
//! D-norms, copulas attracted to extreme value copulas, univariate norming
//! constants, the limiting covariance `Σ`, a chi-square ratio representation
//! and a Monte Carlo harness that checks asymptotic normality.

pub mod chi2rep;
pub mod copula;
pub mod dnorm;
pub mod error;
pub mod experiment;
pub mod io;
pub mod margins;
pub mod matrix;
pub mod normal;
pub mod orderstats;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use matrix::SquareMatrix;
