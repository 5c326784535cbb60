//! One function per pipeline, each turning a resolved config into CSV tables.

use qrisk_core::cov_eigen::eigen_report;
use qrisk_core::distributions::{matrix_params, max_legal_mu, norm_equivalence, sample_dataset};
use qrisk_core::estimators::{minimax_variance_estimate, minimax_variance_weight, ErrorFn};
use qrisk_core::mc;
use qrisk_core::numerics::RngStream;
use qrisk_core::quantile::{empirical_quantile, EmpiricalDistribution, QuantileEstimate};
use qrisk_core::risk::{
    design_replicates, excess_error, guarantee_rhs, lemma_bounds_check, minimax_report, quantile_risk_mc,
    square_bounds, sufficiency_check, Estimator, ExcessErrorOracle, PPowerExtras,
};

use crate::config::{EstimatorChoice, ResolvedConfig};
use crate::output::{opt_real, real, Table};
use crate::CliError;

/// Base stream of a run; sample size `n` always draws from its child `n`, so
/// a sweep's rows do not depend on which other sizes are in the list.
fn stream(cfg: &ResolvedConfig, n: usize) -> RngStream {
    RngStream::new(cfg.seed, 0).child(n as u64)
}

fn estimators(cfg: &ResolvedConfig, n: usize) -> Result<Vec<Estimator>, CliError> {
    let minmax = || cfg.minmax_config(n).map(Estimator::MinMax);
    Ok(match cfg.estimator {
        EstimatorChoice::Ols => vec![Estimator::Ols],
        EstimatorChoice::Minmax => vec![minmax()?],
        EstimatorChoice::Both => vec![Estimator::Ols, minmax()?],
    })
}

pub fn fit(cfg: &ResolvedConfig) -> Result<Vec<Table>, CliError> {
    let spec = cfg.problem_spec()?;
    let oracle = ExcessErrorOracle::new(spec.clone())?;
    let mut t = Table::new(
        "fit",
        &["n", "estimator", "coordinate", "w_hat", "w_star", "excess_error", "iterations", "singular"],
    );
    for &n in &cfg.n {
        let data = sample_dataset(&spec, n, &mut stream(cfg, n))?;
        for est in estimators(cfg, n)? {
            let (w, iterations, singular) = match &est {
                Estimator::Ols => {
                    let f = qrisk_core::estimators::ols_fit(&data);
                    (f.w_hat, f.iterations, f.singular)
                }
                Estimator::MinMax(c) => {
                    let f = qrisk_core::estimators::minmax_fit(&data, spec.error, c)?;
                    (f.w_hat, f.iterations, f.singular)
                }
            };
            let excess = if singular { f64::INFINITY } else { excess_error(&oracle, &w)? };
            for (j, (wj, sj)) in w.iter().zip(&spec.w_star).enumerate() {
                t.push(vec![
                    n.to_string(),
                    est.label(),
                    j.to_string(),
                    real(*wj),
                    real(*sj),
                    real(excess),
                    iterations.to_string(),
                    singular.to_string(),
                ]);
            }
        }
    }
    Ok(vec![t])
}

fn quantile_cells(q: &QuantileEstimate) -> [String; 4] {
    [real(q.value), real(q.ci_low), real(q.ci_high), real(q.se_proxy)]
}

pub fn risk(cfg: &ResolvedConfig) -> Result<Vec<Table>, CliError> {
    let spec = cfg.problem_spec()?;
    let mut summary = Table::new(
        "risk",
        &[
            "estimator", "spec", "n", "d", "delta", "reps", "seed", "quantile_risk", "ci_low", "ci_high", "se_proxy",
            "singular_reps",
        ],
    );
    let mut excess = Table::new("risk_excess", &["estimator", "n", "rank", "excess_error"]);
    for &n in &cfg.n {
        for est in estimators(cfg, n)? {
            // every estimator sees the same datasets
            let r = quantile_risk_mc(&spec, &est, n, cfg.delta, cfg.reps, &stream(cfg, n))?;
            let mut row = vec![
                r.estimator.clone(),
                r.spec.clone(),
                n.to_string(),
                cfg.d.to_string(),
                real(cfg.delta),
                cfg.reps.to_string(),
                cfg.seed.to_string(),
            ];
            row.extend(quantile_cells(&r.quantile_risk));
            row.push(r.singular_reps.to_string());
            summary.push(row);
            for (i, v) in r.excess.sorted().iter().enumerate() {
                excess.push(vec![r.estimator.clone(), n.to_string(), (i + 1).to_string(), real(*v)]);
            }
        }
    }
    Ok(vec![summary, excess])
}

pub fn minimax(cfg: &ResolvedConfig) -> Result<Vec<Table>, CliError> {
    let input = cfg.input_dist()?;
    let error = cfg.error_fn();
    let mut t = Table::new(
        "minimax",
        &[
            "n", "d", "delta", "sigma2", "error", "reps", "exact_mc", "exact_ci_low", "exact_ci_high", "exact_se",
            "asymptotic", "lower_bound_pnorm", "bounds_lower", "bounds_upper", "bounds_lower_se", "bounds_upper_se",
            "epsilon", "sufficient_n",
        ],
    );
    for &n in &cfg.n {
        let r = minimax_report(&input, error, cfg.sigma2, n, cfg.delta, cfg.reps, &stream(cfg, n))?;
        let mut row = vec![
            n.to_string(),
            cfg.d.to_string(),
            real(cfg.delta),
            real(cfg.sigma2),
            error.label(),
            cfg.reps.to_string(),
        ];
        row.extend(quantile_cells(&r.exact_mc));
        row.push(real(r.asymptotic_formula));
        row.push(opt_real(r.lower_bound_pnorm));
        let b = r.bounds.as_ref();
        row.push(opt_real(b.map(|b| b.lower)));
        row.push(opt_real(b.map(|b| b.upper)));
        row.push(opt_real(b.map(|b| b.lower_se)));
        row.push(opt_real(b.map(|b| b.upper_se)));
        row.push(opt_real(b.map(|b| b.epsilon.value)));
        row.push(r.sufficient_n.map(|v| v.to_string()).unwrap_or_default());
        t.push(row);
    }
    Ok(vec![t])
}

pub fn eigen(cfg: &ResolvedConfig) -> Result<Vec<Table>, CliError> {
    let input = cfg.input_dist()?;
    let mut t = Table::new(
        "eigen",
        &[
            "n", "d", "delta", "reps", "empirical_quantile", "empirical_ci_low", "empirical_ci_high", "empirical_se",
            "upper_bound", "trim_k", "trimmed_inf_quantile", "trimmed_se",
        ],
    );
    for &n in &cfg.n {
        if let Some(k) = cfg.trim_k {
            if 2 * k >= n {
                return Err(CliError::config("eigen.trim_k", format!("trim level {k} leaves no middle block for n={n}")));
            }
        }
        let trim = cfg.trim_k.map(|k| (k, cfg.multistarts));
        let r = eigen_report(&input, n, cfg.delta, cfg.reps, trim, &stream(cfg, n))?;
        let mut row = vec![n.to_string(), cfg.d.to_string(), real(cfg.delta), cfg.reps.to_string()];
        row.extend(quantile_cells(&r.empirical_quantile));
        row.push(real(r.upper_bound));
        row.push(cfg.trim_k.map(|k| k.to_string()).unwrap_or_default());
        row.push(opt_real(r.trimmed_inf_quantile.map(|q| q.value)));
        row.push(opt_real(r.trimmed_inf_quantile.map(|q| q.se_proxy)));
        t.push(row);
    }
    Ok(vec![t])
}

/// Log-ratio losses `|ln(sigma2 / sigma2_hat)|` of the minimax variance
/// estimator and of the plain second moment over `reps` Gaussian samples of
/// size `n` with known mean zero. Degenerate estimates have infinite loss.
pub fn variance_losses(
    n: usize,
    delta: f64,
    sigma2: f64,
    reps: usize,
    rng: &RngStream,
) -> qrisk_core::Result<(Vec<f64>, Vec<f64>)> {
    let sd = sigma2.sqrt();
    let loss = |est: f64| if est > 0.0 { (sigma2 / est).ln().abs() } else { f64::INFINITY };
    let pairs = mc::replicate(rng, reps, |_, r| -> qrisk_core::Result<(f64, f64)> {
        let mut x = vec![0.0; n];
        r.fill_normal(&mut x);
        x.iter_mut().for_each(|v| *v *= sd);
        let est = minimax_variance_estimate(&x, 0.0, delta)?;
        Ok((loss(est.value), loss(est.value / est.weight)))
    });
    let pairs = pairs.into_iter().collect::<qrisk_core::Result<Vec<_>>>()?;
    Ok(pairs.into_iter().unzip())
}

pub fn var_est(cfg: &ResolvedConfig) -> Result<Vec<Table>, CliError> {
    let mut t = Table::new(
        "var_est",
        &[
            "estimator", "n", "delta", "sigma2", "reps", "quantile_risk", "ci_low", "ci_high", "se_proxy",
            "worst_case_risk", "weight",
        ],
    );
    let level = 1.0 - cfg.delta;
    for &n in &cfg.n {
        let (weight, t_star) = minimax_variance_weight(n, cfg.delta)?;
        let (mm, plain) = variance_losses(n, cfg.delta, cfg.sigma2, cfg.reps, &stream(cfg, n))?;
        for (name, losses, worst, w) in [("minimax", mm, Some(t_star), weight), ("second-moment", plain, None, 1.0)] {
            let q = empirical_quantile(&EmpiricalDistribution::new(losses)?, level)?;
            let mut row = vec![name.to_string(), n.to_string(), real(cfg.delta), real(cfg.sigma2), cfg.reps.to_string()];
            row.extend(quantile_cells(&q));
            row.push(opt_real(worst));
            row.push(real(w));
            t.push(row);
        }
    }
    Ok(vec![t])
}

pub fn bounds(cfg: &ResolvedConfig) -> Result<Vec<Table>, CliError> {
    let input = cfg.input_dist()?;
    let params = matrix_params(&input)?;
    let error = cfg.error_fn();
    let mut t = Table::new("bounds", &["n", "quantity", "value", "se"]);
    for &n in &cfg.n {
        let rng = stream(cfg, n);
        let mut row = |q: &str, v: f64, se: Option<f64>| t.push(vec![n.to_string(), q.to_string(), real(v), opt_real(se)]);
        let extras = match error {
            ErrorFn::Square => {
                let b = square_bounds(&input, cfg.sigma2, n, cfg.delta, cfg.reps, &rng.child(0))?;
                row("epsilon", b.epsilon.value, None);
                row("lower", b.lower, Some(b.lower_se));
                row("upper", b.upper, Some(b.upper_se));
                let stats = design_replicates(&input, n, cfg.reps, &rng.child(1))?;
                // the slack check needs delta above the singular fraction; skip it otherwise
                if let Ok(slacks) = lemma_bounds_check(&stats, cfg.d, cfg.delta) {
                    for s in slacks {
                        row(&format!("{}_slack", s.name), s.slack, Some(s.se));
                    }
                }
                if cfg.delta < 0.5 {
                    let s = sufficiency_check(&input, n, cfg.delta)?;
                    row("sufficiency_threshold", s.threshold, None);
                    row("sufficiency_holds", if s.holds { 1.0 } else { 0.0 }, None);
                }
                None
            }
            ErrorFn::PPower(p) => {
                let spec = cfg.problem_spec()?;
                let mu = spec.noise.abs_moment(p - 2.0)?.min(max_legal_mu(p, cfg.sigma2)?);
                if cfg.delta < 0.5 {
                    row("lower_bound_pnorm", qrisk_core::risk::pnorm_lower_bound(p, cfg.sigma2, cfg.d, n, cfg.delta)?, None);
                }
                Some(PPowerExtras {
                    mu,
                    norm_equivalence: norm_equivalence(&input, p)?,
                })
            }
        };
        let g = guarantee_rhs(error, &params, cfg.sigma2, extras, n, cfg.d, cfg.delta)?;
        row("guarantee_risk_bound", g.risk_bound, None);
        row("guarantee_min_n", g.min_n, None);
    }
    Ok(vec![t])
}
