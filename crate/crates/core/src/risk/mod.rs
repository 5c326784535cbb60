//! Quantile risk of estimators, the exact and asymptotic minimax risk over
//! the Gaussian-noise class, and the closed-form bounds around it.

mod bounds;
mod excess;
mod minimax;
mod quantile_risk;

pub use bounds::{
    design_replicates, guarantee_rhs, k_constant, lemma_bounds_check, square_bounds, sufficiency_check, w_quantile,
    DesignStats, GuaranteeBound, LemmaSlack, PPowerExtras, SquareBounds, Sufficiency,
};
pub use excess::{excess_error, ExcessErrorOracle};
pub use minimax::{asymptotic_minimax, gauss_minimax_exact_mc, pnorm_lower_bound};
pub use quantile_risk::{quantile_risk_mc, spec_label, Estimator, RiskReport};

use crate::distributions::{matrix_params, InputDist};
use crate::error::Result;
use crate::estimators::ErrorFn;
use crate::numerics::RngStream;
use crate::quantile::QuantileEstimate;

#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxReport {
    pub n: usize,
    pub d: usize,
    pub delta: f64,
    pub sigma2: f64,
    pub exact_mc: QuantileEstimate,
    /// `asymptotic_minimax / n`.
    pub asymptotic_formula: f64,
    /// p-th power error with `delta < 1/2` only.
    pub lower_bound_pnorm: Option<f64>,
    /// Square error only, when `delta` meets the bounds' level condition.
    pub bounds: Option<SquareBounds>,
    /// Smallest `n` meeting the square-error sufficiency condition.
    pub sufficient_n: Option<usize>,
}

/// Exact minimax risk with every applicable formula at the same `(n, delta)`.
pub fn minimax_report(
    input: &InputDist,
    error: ErrorFn,
    sigma2: f64,
    n: usize,
    delta: f64,
    reps: usize,
    rng: &RngStream,
) -> Result<MinimaxReport> {
    let d = input.dim();
    let exact_mc = gauss_minimax_exact_mc(input, error, sigma2, n, delta, reps, &rng.child(0))?;
    let asymptotic_formula = asymptotic_minimax(error, sigma2, d, delta)? / n as f64;
    let (lower_bound_pnorm, bounds, sufficient_n) = match error {
        ErrorFn::PPower(p) => {
            let lb = if delta < 0.5 { Some(pnorm_lower_bound(p, sigma2, d, n, delta)?) } else { None };
            (lb, None, None)
        }
        ErrorFn::Square => {
            let b = square_bounds(input, sigma2, n, delta, reps, &rng.child(1)).ok();
            let suff = if delta < 0.5 { bounds::sufficient_n(&matrix_params(input)?, d, delta) } else { None };
            (None, b, suff)
        }
    };
    Ok(MinimaxReport {
        n,
        d,
        delta,
        sigma2,
        exact_mc,
        asymptotic_formula,
        lower_bound_pnorm,
        bounds,
        sufficient_n,
    })
}
