use super::excess::ExcessErrorOracle;
use crate::distributions::{sample_dataset, Dataset, ProblemSpec};
use crate::error::{invalid, Error, Result};
use crate::estimators::{minmax_fit, ols_fit, ErrorFn, MinMaxConfig};
use crate::mc;
use crate::numerics::RngStream;
use crate::quantile::{empirical_quantile, EmpiricalDistribution, QuantileEstimate};

/// A regression procedure to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Ols,
    MinMax(MinMaxConfig),
}

impl Estimator {
    pub fn label(&self) -> String {
        match self {
            Estimator::Ols => "ols".into(),
            Estimator::MinMax(c) => format!("minmax(k={})", c.k.k()),
        }
    }

    /// Fitted weights, or `None` when the fit is degenerate and the excess
    /// error is taken to be infinite.
    pub fn fit(&self, data: &Dataset, error: ErrorFn) -> Result<Option<Vec<f64>>> {
        match self {
            Estimator::Ols => {
                let fit = ols_fit(data);
                Ok((!fit.singular).then_some(fit.w_hat))
            }
            Estimator::MinMax(config) => Ok(Some(minmax_fit(data, error, config)?.w_hat)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RiskReport {
    pub estimator: String,
    pub spec: String,
    pub n: usize,
    pub delta: f64,
    pub quantile_risk: QuantileEstimate,
    pub reps: usize,
    pub seed: u64,
    /// Replicates whose fit was degenerate (infinite excess error).
    pub singular_reps: usize,
    /// All per-replicate excess errors.
    pub excess: EmpiricalDistribution,
}

pub fn spec_label(spec: &ProblemSpec) -> String {
    format!("{} | {} | {}", spec.input.label(), spec.noise.label(), spec.error.label())
}

/// `Q_{E(w_hat)}(1 - delta)` over `reps` independent datasets of size `n`.
pub fn quantile_risk_mc(
    spec: &ProblemSpec,
    estimator: &Estimator,
    n: usize,
    delta: f64,
    reps: usize,
    rng: &RngStream,
) -> Result<RiskReport> {
    if reps < 100 {
        return invalid(format!("need at least 100 replicates, got {reps}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidLevel(format!("delta must be in (0, 1), got {delta}")));
    }
    if delta < 1.0 / reps as f64 {
        return Err(Error::InvalidLevel(format!("delta={delta} is below 1/reps; raise reps")));
    }
    if n == 0 {
        return invalid("sample size must be positive");
    }
    if let Estimator::MinMax(c) = estimator {
        if c.k.n() != n {
            return invalid(format!("trim level is for n={}, not n={n}", c.k.n()));
        }
    }
    let oracle = ExcessErrorOracle::new(spec.clone())?;
    let losses = mc::replicate(rng, reps, |_, r| -> Result<f64> {
        let data = sample_dataset(spec, n, r)?;
        match estimator.fit(&data, spec.error)? {
            Some(w) => oracle.excess(&w),
            None => Ok(f64::INFINITY),
        }
    });
    let losses = losses.into_iter().collect::<Result<Vec<f64>>>()?;
    let singular_reps = losses.iter().filter(|l| l.is_infinite()).count();
    let excess = EmpiricalDistribution::new(losses)?;
    Ok(RiskReport {
        estimator: estimator.label(),
        spec: spec_label(spec),
        n,
        delta,
        quantile_risk: empirical_quantile(&excess, 1.0 - delta)?,
        reps,
        seed: rng.seed(),
        singular_reps,
        excess,
    })
}
