use super::minimax::check_delta;
use crate::distributions::{matrix_params, moment_ratio_bound, singularity_prob, InputDist, MatrixParams, SingularityEstimate};
use crate::error::{invalid, Error, Result};
use crate::estimators::ErrorFn;
use crate::mc;
use crate::numerics::{std_normal_abs_moment, sym_eigen, RngStream, SymMatrix};
use crate::quantile::{empirical_quantile, EmpiricalDistribution, QuantileEstimate};

/// Per-design statistics of the whitened sample covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignStats {
    /// `Tr(Sigma~_n^{-1})`, infinite for singular designs.
    pub trace_inv: f64,
    /// `lambda_min(Sigma~_n)`, zero for singular designs.
    pub lambda_min: f64,
}

impl DesignStats {
    /// `lambda_max(Sigma~_n^{-1})`.
    pub fn lambda_max_inv(&self) -> f64 {
        if self.lambda_min > 0.0 {
            1.0 / self.lambda_min
        } else {
            f64::INFINITY
        }
    }
}

pub fn design_replicates(input: &InputDist, n: usize, reps: usize, rng: &RngStream) -> Result<Vec<DesignStats>> {
    if n == 0 || reps == 0 {
        return invalid("n and reps must be positive");
    }
    let d = input.dim();
    let whiten = input.covariance().inverse_sqrt()?;
    let singular = DesignStats { trace_inv: f64::INFINITY, lambda_min: 0.0 };
    Ok(mc::replicate(rng, reps, |_, r| {
        if n < d {
            return singular;
        }
        let xs = input.sample_inputs(n, r);
        let spec = sym_eigen(&SymMatrix::gram(&xs, d, 1.0 / n as f64).congruence(&whiten));
        if spec.is_rank_deficient() || spec.min() <= 0.0 {
            return singular;
        }
        DesignStats {
            trace_inv: spec.values.iter().map(|l| 1.0 / l).sum(),
            lambda_min: spec.min(),
        }
    }))
}

/// Quantile of `W` with `W | design ~ Exp(lambda_min)`, from the mixture CDF
/// `F(t) = mean_i (1 - exp(-lambda_i t))` over the designs (no sampling of
/// `W`). `Exp(0)` is the unit mass at infinity.
pub fn w_quantile(stats: &[DesignStats], level: f64) -> Result<QuantileEstimate> {
    check_delta(level)?;
    let m = stats.len();
    if m == 0 {
        return invalid("need at least one design");
    }
    let at = |level: f64| -> f64 {
        if level <= 0.0 {
            return 0.0;
        }
        let cdf = |t: f64| stats.iter().map(|s| -(-s.lambda_min * t).exp_m1()).sum::<f64>() / m as f64;
        let mut hi = 1.0;
        while cdf(hi) < level {
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if cdf(mid) >= level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let h = 1.96 * (level * (1.0 - level) / m as f64).sqrt();
    let value = at(level);
    let ci_low = at(level - h);
    let ci_high = if level + h >= 1.0 { f64::INFINITY } else { at(level + h) };
    Ok(QuantileEstimate {
        level,
        value,
        replicates: m,
        ci_low,
        ci_high,
        se_proxy: if ci_high.is_finite() { (ci_high - ci_low) / (2.0 * 1.96) } else { f64::INFINITY },
    })
}

fn trace_quantile(stats: &[DesignStats], level: f64) -> Result<QuantileEstimate> {
    empirical_quantile(&EmpiricalDistribution::new(stats.iter().map(|s| s.trace_inv).collect())?, level)
}

fn lambda_max_inv_quantile(stats: &[DesignStats], level: f64) -> Result<QuantileEstimate> {
    empirical_quantile(&EmpiricalDistribution::new(stats.iter().map(|s| s.lambda_max_inv()).collect())?, level)
}

/// Upper and lower bounds on the square-error minimax risk at failure
/// probability `epsilon_n + delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareBounds {
    pub lower: f64,
    pub upper: f64,
    pub lower_se: f64,
    pub upper_se: f64,
    pub epsilon: SingularityEstimate,
    /// `1 - epsilon_n - delta/2`, with the low edge of the `epsilon_n` interval.
    pub upper_level: f64,
    /// `1 - epsilon_n - 4 delta`, with the high edge of the `epsilon_n` interval.
    pub lower_level: f64,
    pub trace_upper: QuantileEstimate,
    pub w_upper: QuantileEstimate,
    pub trace_lower: QuantileEstimate,
    pub w_lower: QuantileEstimate,
}

/// `upper = 2 (sigma2/n) [Q_Tr(1 - eps - delta/2) + Q_W(1 - eps - delta/2)]`,
/// `lower = (sigma2 / 6428 n) [Q_Tr(1 - eps - 4 delta) + Q_W(1 - eps - 4 delta)]`.
pub fn square_bounds(input: &InputDist, sigma2: f64, n: usize, delta: f64, reps: usize, rng: &RngStream) -> Result<SquareBounds> {
    check_delta(delta)?;
    if !(sigma2 > 0.0) {
        return invalid(format!("sigma2 must be positive, got {sigma2}"));
    }
    let epsilon = singularity_prob(input, n, reps, &rng.child(1))?;
    let (eps_lo, eps_hi) = if epsilon.exact { (epsilon.value, epsilon.value) } else { (epsilon.low, epsilon.high) };
    if !(delta < (1.0 - eps_hi) / 4.0) {
        return Err(Error::InvalidLevel(format!(
            "delta={delta} must be below (1 - eps_n)/4 = {}",
            (1.0 - eps_hi) / 4.0
        )));
    }
    let stats = design_replicates(input, n, reps, &rng.child(0))?;
    let upper_level = 1.0 - eps_lo - delta / 2.0;
    let lower_level = 1.0 - eps_hi - 4.0 * delta;
    let trace_upper = trace_quantile(&stats, upper_level)?;
    let w_upper = w_quantile(&stats, upper_level)?;
    let trace_lower = trace_quantile(&stats, lower_level)?;
    let w_lower = w_quantile(&stats, lower_level)?;
    let c = sigma2 / n as f64;
    Ok(SquareBounds {
        upper: 2.0 * c * (trace_upper.value + w_upper.value),
        lower: c / 6428.0 * (trace_lower.value + w_lower.value),
        upper_se: 2.0 * c * trace_upper.combined_se(&w_upper),
        lower_se: c / 6428.0 * trace_lower.combined_se(&w_lower),
        epsilon,
        upper_level,
        lower_level,
        trace_upper,
        w_upper,
        trace_lower,
        w_lower,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaSlack {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; nonnegative when the inequality holds.
    pub slack: f64,
    /// Monte Carlo scale of the slack.
    pub se: f64,
}

/// The four inequalities
/// `d (1 - delta) <= Q_Tr(1 - delta) <= d Q_{lambda_max(Sigma~^{-1})}(1 - delta)` and
/// `log(1/delta) <= Q_W(1 - delta) <= Q_{lambda_max(Sigma~^{-1})}(1 - delta/2) log(2/delta)`
/// on the empirical quantiles of `stats`.
pub fn lemma_bounds_check(stats: &[DesignStats], d: usize, delta: f64) -> Result<Vec<LemmaSlack>> {
    check_delta(delta)?;
    let singular = stats.iter().filter(|s| s.lambda_min == 0.0).count() as f64 / stats.len().max(1) as f64;
    if !(delta > singular) {
        return Err(Error::InvalidLevel(format!(
            "delta={delta} must exceed the singular fraction {singular}"
        )));
    }
    let tr = trace_quantile(stats, 1.0 - delta)?;
    let lmax = lambda_max_inv_quantile(stats, 1.0 - delta)?;
    let lmax_half = lambda_max_inv_quantile(stats, 1.0 - delta / 2.0)?;
    let w = w_quantile(stats, 1.0 - delta)?;
    let d = d as f64;
    let slack = |name, lhs: f64, rhs: f64, se: f64| LemmaSlack { name, lhs, rhs, slack: rhs - lhs, se };
    Ok(vec![
        slack("trace_lower", d * (1.0 - delta), tr.value, tr.se_proxy),
        slack("trace_upper", tr.value, d * lmax.value, tr.se_proxy.hypot(d * lmax.se_proxy)),
        slack("w_lower", (1.0 / delta).ln(), w.value, w.se_proxy),
        slack(
            "w_upper",
            w.value,
            lmax_half.value * (2.0 / delta).ln(),
            w.se_proxy.hypot(lmax_half.se_proxy * (2.0 / delta).ln()),
        ),
    ])
}

/// Extra parameters of the p-th power class needed by its guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PPowerExtras {
    pub mu: f64,
    /// `N(P_X, p)`, the `L^p`-`L^2` norm equivalence constant.
    pub norm_equivalence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuaranteeBound {
    pub risk_bound: f64,
    pub min_n: f64,
}

/// `K(p) = (p - 1)^2 m(2p - 2) / m(p - 2)`.
pub fn k_constant(p: f64) -> Result<f64> {
    Ok((p - 1.0) * (p - 1.0) * std_normal_abs_moment(2.0 * p - 2.0)? / std_normal_abs_moment(p - 2.0)?)
}

/// Risk bound and sample-size requirement of the min-max procedure.
///
/// Square: `100^2 sigma2 (d + log(1/delta)) / n`, requiring
/// `n >= 800^2 (8 log(6d) [lambda_max(S) + 1] + [R + 1] log(1/delta))`.
/// p-th power: `120^2 K(p) sigma^p (d + log(1/delta)) / n`, requiring
/// `n >= r^{(p-2)/(p-1)} mu^{-p/(p-1)} [8 log(6d)(lambda_max(S) + 1) + (R + 1) log(1/delta)]
///  + 2400^2 r mu^{-p/(p-2)} p^4 N^{2p/(p-2)} [d + log(4/delta)]`.
pub fn guarantee_rhs(
    error: ErrorFn,
    params: &MatrixParams,
    sigma2: f64,
    extras: Option<PPowerExtras>,
    n: usize,
    d: usize,
    delta: f64,
) -> Result<GuaranteeBound> {
    check_delta(delta)?;
    if n == 0 || d == 0 {
        return invalid("n and d must be positive");
    }
    let (nf, df) = (n as f64, d as f64);
    let ld = (1.0 / delta).ln();
    let moments = 8.0 * (6.0 * df).ln() * (params.lambda_max_s + 1.0) + (params.r + 1.0) * ld;
    match error {
        ErrorFn::Square => Ok(GuaranteeBound {
            risk_bound: 100f64.powi(2) * sigma2 * (df + ld) / nf,
            min_n: 800f64.powi(2) * moments,
        }),
        ErrorFn::PPower(p) => {
            let Some(extras) = extras else {
                return invalid("the p-th power guarantee needs mu and the norm equivalence constant");
            };
            if !(extras.mu > 0.0) || !(extras.norm_equivalence > 0.0) {
                return invalid("mu and the norm equivalence constant must be positive");
            }
            let r = moment_ratio_bound(p, sigma2)?;
            let mu = extras.mu;
            let min_n = r.powf((p - 2.0) / (p - 1.0)) * mu.powf(-p / (p - 1.0)) * moments
                + 2400f64.powi(2)
                    * r
                    * mu.powf(-p / (p - 2.0))
                    * p.powi(4)
                    * extras.norm_equivalence.powf(2.0 * p / (p - 2.0))
                    * (df + (4.0 / delta).ln());
            Ok(GuaranteeBound {
                risk_bound: 120f64.powi(2) * k_constant(p)? * sigma2.sqrt().powf(p) * (df + ld) / nf,
                min_n,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sufficiency {
    pub holds: bool,
    /// `max{128 [4 log(3d) lambda_max(S) + R log(2/delta)], log(3d) / (18 lambda_max(S)), log(2/delta) / R}`.
    pub threshold: f64,
}

/// Whether `n` is large enough for the minimax risk to be of order
/// `sigma^2 (d + log(1/delta)) / n` under square error.
pub fn sufficiency_check(input: &InputDist, n: usize, delta: f64) -> Result<Sufficiency> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidLevel(format!("delta must be in (0, 1/2), got {delta}")));
    }
    let params = matrix_params(input)?;
    let threshold = sufficiency_threshold(&params, input.dim(), delta);
    Ok(Sufficiency { holds: n as f64 >= threshold, threshold })
}

fn sufficiency_threshold(params: &MatrixParams, d: usize, delta: f64) -> f64 {
    let l3d = (3.0 * d as f64).ln();
    let l2 = (2.0 / delta).ln();
    let (s, r) = (params.lambda_max_s, params.r);
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::INFINITY };
    (128.0 * (4.0 * l3d * s + r * l2)).max(ratio(l3d, 18.0 * s)).max(ratio(l2, r))
}

pub(crate) fn sufficient_n(params: &MatrixParams, d: usize, delta: f64) -> Option<usize> {
    let t = sufficiency_threshold(params, d, delta);
    t.is_finite().then(|| t.ceil() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_bounds_are_closed_form() {
        let rng = RngStream::new(31, 0);
        let (n, delta, sigma2) = (20, 0.05, 1.0);
        let b = square_bounds(&InputDist::constant_one(), sigma2, n, delta, 1000, &rng).unwrap();
        let want = 2.0 * sigma2 / n as f64 * (1.0 + (2.0 / delta).ln());
        assert!((b.upper - want).abs() < 1e-12 * want, "{} {want}", b.upper);
        let b4 = square_bounds(&InputDist::constant_one(), 4.0 * sigma2, n, delta, 1000, &rng).unwrap();
        assert!((b4.upper - 4.0 * b.upper).abs() < 1e-12 && (b4.lower - 4.0 * b.lower).abs() < 1e-15);
        assert!(b.lower < b.upper);
        assert!(matches!(
            square_bounds(&InputDist::constant_one(), 1.0, n, 0.3, 1000, &rng),
            Err(Error::InvalidLevel(_))
        ));
    }

    #[test]
    fn lemma_slacks_constant_input() {
        let stats = vec![DesignStats { trace_inv: 1.0, lambda_min: 1.0 }; 500];
        let s = lemma_bounds_check(&stats, 1, 0.1).unwrap();
        assert!((s[0].slack - 0.1).abs() < 1e-15);
        assert_eq!(s[1].slack, 0.0);
        assert!(s[2].slack.abs() < 1e-12);
        assert!(s[3].slack > 0.0);
    }

    #[test]
    fn lemma_slacks_gaussian() {
        let input = InputDist::standard_gaussian(3).unwrap();
        let stats = design_replicates(&input, 200, 4000, &RngStream::new(32, 0)).unwrap();
        for s in lemma_bounds_check(&stats, 3, 0.1).unwrap() {
            assert!(s.slack >= -3.0 * s.se, "{s:?}");
        }
    }

    #[test]
    fn w_quantile_handles_singular_mass() {
        let mut stats = vec![DesignStats { trace_inv: 1.0, lambda_min: 2.0 }; 90];
        stats.extend(vec![DesignStats { trace_inv: f64::INFINITY, lambda_min: 0.0 }; 10]);
        assert!(w_quantile(&stats, 0.95).unwrap().value.is_infinite());
        // 0.9 (1 - exp(-2t)) = 0.45 at t = ln(2) / 2
        let q = w_quantile(&stats, 0.45).unwrap().value;
        assert!((q - 0.5 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn guarantee_examples() {
        let g = matrix_params(&InputDist::standard_gaussian(2).unwrap()).unwrap();
        let b = guarantee_rhs(ErrorFn::Square, &g, 1.0, None, 10_000, 2, 0.05).unwrap();
        assert!((b.risk_bound - (2.0 + 20f64.ln())).abs() < 1e-12);
        let b2 = guarantee_rhs(ErrorFn::Square, &g, 1.0, None, 10_000, 2, 0.005).unwrap();
        let slope = 800f64.powi(2) * (g.r + 1.0) * 10f64.ln();
        assert!(((b2.min_n - b.min_n) - slope).abs() < 1e-6 * slope);
        assert!((k_constant(4.0).unwrap() - 135.0).abs() < 1e-10);
        let quartic = ErrorFn::p_power(4.0).unwrap();
        assert!(guarantee_rhs(quartic, &g, 1.0, None, 100, 2, 0.05).is_err());
        let extras = PPowerExtras { mu: 1.0, norm_equivalence: 3f64.powf(0.25) };
        let b = guarantee_rhs(quartic, &g, 1.0, Some(extras), 100, 2, 0.05).unwrap();
        assert!((b.risk_bound - 14400.0 * 135.0 * (2.0 + 20f64.ln()) / 100.0).abs() < 1e-6);
        assert!(b.min_n > 0.0);
    }

    #[test]
    fn sufficiency_examples() {
        let g2 = InputDist::standard_gaussian(2).unwrap();
        assert!(sufficiency_check(&g2, 1_000_000, 0.1).unwrap().holds);
        assert!(!sufficiency_check(&g2, 10, 0.1).unwrap().holds);
        let g10 = InputDist::standard_gaussian(10).unwrap();
        assert!(sufficiency_check(&g10, 10, 0.1).unwrap().threshold > sufficiency_check(&g2, 10, 0.1).unwrap().threshold);
        assert!(sufficiency_check(&g2, 10, 0.5).is_err());
    }
}
