//! Estimators: least squares, the trimmed min-max procedure, the sample mean
//! and the minimax variance estimator.

mod error_fn;
mod minmax;
mod ols;
mod variance;

pub use error_fn::ErrorFn;
pub use minmax::{certificate, minmax_fit, psi_k, trim_level_for_delta, Init, MinMaxConfig};
pub use ols::{ols_fit, sample_mean, FitResult};
pub use variance::{minimax_variance_estimate, minimax_variance_weight, p_alpha, p_alpha_inverse, VarianceEstimate};
