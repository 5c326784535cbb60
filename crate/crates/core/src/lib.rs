//! Quantile risk for linear regression.
//!
//! The crate evaluates estimators by the `1 - delta` quantile of their excess
//! error over random datasets rather than by expected error. It contains:
//!
//! - [`numerics`]: special functions, dense symmetric linear algebra,
//!   Gauss-Hermite quadrature and reproducible random streams.
//! - [`quantile`]: lower empirical quantiles, pseudo-inverses and the
//!   transformation-invariance law.
//! - [`truncation`]: the clamp `phi_{alpha,beta}` and trimmed sum `phi_k`.
//! - [`distributions`]: input laws, noise models and their moment parameters.
//! - [`cov_eigen`]: quantiles of `1 - lambda_min` of the whitened sample
//!   covariance and related bounds.
//! - [`estimators`]: OLS, the trimmed min-max regression procedure, the sample
//!   mean and the minimax variance estimator.
//! - [`risk`]: Monte Carlo quantile risk, the exact Gaussian-class minimax
//!   risk and the closed-form bounds that surround it.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cov_eigen;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod mc;
pub mod numerics;
pub mod quantile;
pub mod risk;
pub mod truncation;

pub use error::{Error, Result};
