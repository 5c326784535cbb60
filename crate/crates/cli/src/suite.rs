//! The acceptance battery: thirteen numbered criteria, each reproducing an
//! exact formula or checking an identity, with a pass/fail verdict.
//!
//! Criterion `i` draws from `RngStream::new(seed, i)`, so criteria can run
//! alone or in any order with identical results.

use std::time::Instant;

use qrisk_core::cov_eigen::{eigen_report, min_eig_quantile_mc, trimmed_directional_inf, upper_bound_eig};
use qrisk_core::distributions::{
    class_membership_check, matrix_params, singularity_prob, Dataset, DistClass, InputDist, NoiseModel, ProblemSpec,
};
use qrisk_core::estimators::{
    minimax_variance_estimate, minimax_variance_weight, minmax_fit, ols_fit, p_alpha, p_alpha_inverse, ErrorFn,
    MinMaxConfig,
};
use qrisk_core::numerics::{chi_square_quantile, erf, std_normal_abs_moment, GaussLegendre, RngStream, SymMatrix};
use qrisk_core::quantile::{
    check_transform_invariance, empirical_quantile, pseudo_inverse_point, EmpiricalDistribution, StepFunction,
};
use qrisk_core::risk::{
    design_replicates, gauss_minimax_exact_mc, guarantee_rhs, k_constant, lemma_bounds_check, pnorm_lower_bound,
    quantile_risk_mc, square_bounds, Estimator,
};
use qrisk_core::truncation::{clamp, middle_sum, sort_star, trimmed_sum, TrimLevel};
use qrisk_core::Result;

use crate::commands::variance_losses;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Reduced replicate counts with widened tolerances.
    pub quick: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u64,
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
    pub required: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "{} {:>2} {:<28} measured: {} | required: {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.required,
            self.seconds
        )
    }
}

pub const CRITERIA: [(u64, &str); 13] = [
    (1, "exact minimax, X = 1"),
    (2, "OLS is minimax"),
    (3, "asymptotic minimax risk"),
    (4, "square-error bounds"),
    (5, "truncation calculus"),
    (6, "quantile calculus"),
    (7, "|Z| cdf bounds"),
    (8, "eigenvalue upper bound"),
    (9, "trimmed infimum"),
    (10, "variance estimator"),
    (11, "robust regression"),
    (12, "infinite risk"),
    (13, "p-th power lower bound"),
];

struct Outcome {
    passed: bool,
    measured: String,
    required: String,
}

impl Outcome {
    fn new(passed: bool, measured: impl Into<String>, required: impl Into<String>) -> Self {
        Self {
            passed,
            measured: measured.into(),
            required: required.into(),
        }
    }
}

#[derive(Clone, Copy)]
struct Scale {
    quick: bool,
}

impl Scale {
    fn pick<T>(&self, full: T, quick: T) -> T {
        if self.quick {
            quick
        } else {
            full
        }
    }
}

/// Runs criterion `id` (1 to 13).
pub fn run_criterion(id: u64, opts: SuiteOptions) -> CriterionResult {
    let name = CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, n)| *n)
        .unwrap_or("unknown criterion");
    let rng = RngStream::new(opts.seed, id);
    let s = Scale { quick: opts.quick };
    let start = Instant::now();
    let outcome = match id {
        1 => c1_exact_constant(s, &rng),
        2 => c2_ols_minimax(s, &rng),
        3 => c3_asymptotic(s, &rng),
        4 => c4_bounds(s, &rng),
        5 => c5_truncation(&rng),
        6 => c6_quantiles(&rng),
        7 => c7_abs_gaussian_cdf(),
        8 => c8_eigen_upper(s, &rng),
        9 => c9_trimmed_inf(s, &rng),
        10 => c10_variance(s, &rng),
        11 => c11_robust(s, &rng),
        12 => c12_infinite(s, &rng),
        13 => c13_pnorm(s, &rng),
        _ => Ok(Outcome::new(false, "no such criterion", "id in 1..=13")),
    };
    let outcome = outcome.unwrap_or_else(|e| Outcome::new(false, format!("error: {e}"), "completes without error"));
    CriterionResult {
        id,
        name,
        passed: outcome.passed,
        measured: outcome.measured,
        required: outcome.required,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_suite(opts: SuiteOptions) -> Vec<CriterionResult> {
    CRITERIA.iter().map(|(id, _)| run_criterion(*id, opts)).collect()
}

fn c1_exact_constant(s: Scale, rng: &RngStream) -> Result<Outcome> {
    let (reps, tol) = s.pick((50_000, 0.02), (5_000, 0.05));
    let q = gauss_minimax_exact_mc(&InputDist::constant_one(), ErrorFn::Square, 1.0, 50, 0.1, reps, rng)?;
    let want = chi_square_quantile(0.9, 1.0)? / 100.0;
    let rel = (q.value - want).abs() / want;
    Ok(Outcome::new(
        rel <= tol,
        format!("exact {:.6} vs chi-square {want:.6}, rel. err {rel:.2e}", q.value),
        format!("rel. err <= {tol}"),
    ))
}

fn c2_ols_minimax(s: Scale, rng: &RngStream) -> Result<Outcome> {
    let (reps, k) = s.pick((20_000, 3.0), (4_000, 4.0));
    let input = InputDist::standard_gaussian(2)?;
    let spec = ProblemSpec::new(input.clone(), vec![1.0, -2.0], NoiseModel::gaussian(1.0)?, ErrorFn::Square)?;
    let ols = quantile_risk_mc(&spec, &Estimator::Ols, 40, 0.1, reps, &rng.child(0))?.quantile_risk;
    let exact = gauss_minimax_exact_mc(&input, ErrorFn::Square, 1.0, 40, 0.1, reps, &rng.child(1))?;
    let gap = (ols.value - exact.value).abs();
    let se = ols.combined_se(&exact);
    Ok(Outcome::new(
        gap <= k * se,
        format!("OLS {:.6} vs exact {:.6}, gap {:.2} se", ols.value, exact.value, gap / se),
        format!("gap <= {k} se"),
    ))
}

fn c3_asymptotic(s: Scale, rng: &RngStream) -> Result<Outcome> {
    let (reps, tol) = s.pick((20_000, 0.10), (2_000, 0.15));
    let n = 4000;
    let q = gauss_minimax_exact_mc(&InputDist::standard_gaussian(2)?, ErrorFn::Square, 1.0, n, 0.1, reps, rng)?;
    let want = 0.5 * chi_square_quantile(0.9, 2.0)?;
    let scaled = n as f64 * q.value;
    let rel = (scaled - want).abs() / want;
    Ok(Outcome::new(
        rel <= tol,
        format!("n * exact {scaled:.5} vs {want:.5}, rel. err {rel:.2e}"),
        format!("rel. err <= {tol}"),
    ))
}

fn c4_bounds(s: Scale, rng: &RngStream) -> Result<Outcome> {
    let reps = s.pick(20_000, 4_000);
    let (n, delta) = (100, 0.05);
    let input = InputDist::standard_gaussian(2)?;
    let b = square_bounds(&input, 1.0, n, delta, reps, &rng.child(0))?;
    let exact = gauss_minimax_exact_mc(&input, ErrorFn::Square, 1.0, n, delta, reps, &rng.child(1))?;
    let lower_ok = b.lower <= exact.value + 3.0 * b.lower_se.hypot(exact.se_proxy);
    let upper_ok = exact.value <= b.upper + 3.0 * b.upper_se.hypot(exact.se_proxy);
    let stats = design_replicates(&input, n, reps, &rng.child(2))?;
    let slacks = lemma_bounds_check(&stats, 2, delta)?;
    let min_slack = slacks.iter().map(|l| l.slack).fold(f64::INFINITY, f64::min);
    Ok(Outcome::new(
        lower_ok && upper_ok && min_slack >= 0.0,
        format!(
            "{:.3e} <= {:.3e} <= {:.3e}; min lemma slack {min_slack:.3}",
            b.lower, exact.value, b.upper
        ),
        "sandwich within 3 se, lemma slacks >= 0",
    ))
}

/// Uniform multiple of `2^-10` in `[-1024, 1024)`.
fn dyadic(r: &mut RngStream) -> f64 {
    ((r.uniform_open() * 2097152.0).floor() - 1048576.0) / 1024.0
}

fn uniform_index(r: &mut RngStream, n: usize) -> usize {
    ((r.uniform_open() * n as f64) as usize).min(n - 1)
}

fn trimmed(a: &[f64], k: usize) -> f64 {
    trimmed_sum(a, TrimLevel::new(k, a.len()).expect("valid trim")).expect("finite input").clamped_total
}

fn c5_truncation(rng: &RngStream) -> Result<Outcome> {
    let mut r = rng.clone();
    let cases = 1000;
    let mut failures = [0usize; 4];
    let mut max_dev = 0.0f64;
    for _ in 0..cases {
        // clamp identities on dyadic inputs
        let x = dyadic(&mut r);
        let (u, v) = (dyadic(&mut r), dyadic(&mut r));
        let (lo, hi) = (u.min(v), u.max(v));
        let c = uniform_index(&mut r, 64) as f64 / 8.0;
        let y = dyadic(&mut r);
        let phi = clamp(x, lo, hi)?;
        let ok1 = c * phi == clamp(c * x, c * lo, c * hi)?
            && -phi == clamp(-x, -hi, -lo)?
            && phi + y == clamp(x + y, lo + y, hi + y)?;
        failures[0] += usize::from(!ok1);

        let n = 3 + uniform_index(&mut r, 60);
        let k = 1 + uniform_index(&mut r, (n - 1) / 2);
        let mut a: Vec<f64> = (0..n).map(|_| dyadic(&mut r)).collect();
        // ties exercise the ordering
        for j in 0..n {
            if r.uniform_open() < 0.2 {
                a[j] = a[0];
            }
        }
        let b: Vec<f64> = a.iter().map(|v| v + dyadic(&mut r).abs()).collect();
        let (sa, sb) = (sort_star(&a).0, sort_star(&b).0);
        failures[1] += usize::from(sa.iter().zip(&sb).any(|(x, y)| x > y));

        let c = (1 + uniform_index(&mut r, 64)) as f64 / 8.0 * if r.uniform_open() < 0.5 { -1.0 } else { 1.0 };
        let shift = dyadic(&mut r);
        let ca: Vec<f64> = a.iter().map(|v| c * v).collect();
        let sh: Vec<f64> = a.iter().map(|v| v + shift).collect();
        let ta = trimmed(&a, k);
        let ok3 = trimmed(&ca, k) == c * ta && trimmed(&sh, k) == ta + n as f64 * shift && ta <= trimmed(&b, k);
        // off the dyadic grid, scaling and shifting hold to rounding
        let mut g: Vec<f64> = vec![0.0; n];
        r.fill_normal(&mut g);
        let cg = r.normal();
        let scale: f64 = g.iter().map(|v| v.abs()).sum::<f64>() * cg.abs().max(1.0) + n as f64 * cg.abs();
        let cgv: Vec<f64> = g.iter().map(|v| cg * v).collect();
        let sgv: Vec<f64> = g.iter().map(|v| v + cg).collect();
        let tg = trimmed(&g, k);
        let dev = ((trimmed(&cgv, k) - cg * tg).abs()).max((trimmed(&sgv, k) - tg - n as f64 * cg).abs()) / scale;
        max_dev = max_dev.max(dev);
        failures[2] += usize::from(!ok3 || dev > 1e-12);

        // superadditivity in a nonnegative perturbation
        let mut bb = vec![0.0; n];
        r.fill_normal(&mut bb);
        bb.iter_mut().for_each(|v| *v = v.abs());
        let apb: Vec<f64> = g.iter().zip(&bb).map(|(x, y)| x + y).collect();
        let sum_low: f64 = sort_star(&bb).0[..n - 2 * k].iter().sum();
        let tol = 1e-12 * (g.iter().chain(&bb).map(|v| v.abs()).sum::<f64>());
        failures[3] += usize::from(trimmed(&apb, k) < tg + sum_low - tol);
    }
    let total: usize = failures.iter().sum();
    Ok(Outcome::new(
        total == 0,
        format!(
            "violations clamp {} / sort {} / trimmed sum {} / superadditive {} of {cases} each; max rel. dev {max_dev:.1e}",
            failures[0], failures[1], failures[2], failures[3]
        ),
        "0 violations; bitwise on dyadic inputs, 1e-12 otherwise",
    ))
}

fn random_sample(r: &mut RngStream) -> EmpiricalDistribution {
    let m = 1 + uniform_index(r, 40);
    let v = (0..m)
        .map(|_| {
            let u = r.uniform_open();
            if u < 0.05 {
                f64::INFINITY
            } else if u < 0.5 {
                // small integers give ties
                uniform_index(r, 8) as f64
            } else {
                dyadic(r) / 64.0
            }
        })
        .collect();
    EmpiricalDistribution::new(v).expect("nonempty, no NaN")
}

/// Pointwise lower or upper envelope of step functions on the union of
/// their breakpoints.
fn envelope(fs: &[StepFunction], lower: bool) -> StepFunction {
    let mut xs: Vec<f64> = fs.iter().flat_map(|f| f.breakpoints().iter().copied()).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let pick = |x: f64| {
        let it = fs.iter().map(|f| f.eval(x));
        if lower {
            it.fold(f64::INFINITY, f64::min)
        } else {
            it.fold(f64::NEG_INFINITY, f64::max)
        }
    };
    let values = xs.iter().map(|&x| pick(x)).collect();
    StepFunction::new(xs, values, 0.0).expect("envelope of cdfs")
}

fn c6_quantiles(rng: &RngStream) -> Result<Outcome> {
    let mut r = rng.clone();
    let cases = 1000;
    let mut failures = 0usize;
    let mut checks = 0usize;
    let mut check = |ok: bool| {
        checks += 1;
        failures += usize::from(!ok);
    };
    for _ in 0..cases {
        let a = random_sample(&mut r);
        let f = StepFunction::ecdf(&a);
        let level = r.uniform_open();

        let x = dyadic(&mut r) / 64.0;
        check(pseudo_inverse_point(&f, f.eval(x)) <= x);

        // pushing every value up lowers the cdf and raises its pseudo-inverse
        let up: Vec<f64> = a.sorted().iter().map(|v| v + uniform_index(&mut r, 4) as f64).collect();
        let g = StepFunction::ecdf(&EmpiricalDistribution::new(up)?);
        check(pseudo_inverse_point(&f, level) <= pseudo_inverse_point(&g, level));

        let family: Vec<StepFunction> = (0..3).map(|_| StepFunction::ecdf(&random_sample(&mut r))).collect();
        let inverses: Vec<f64> = family.iter().map(|h| pseudo_inverse_point(h, level)).collect();
        let lo = inverses.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = inverses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let of_sup = pseudo_inverse_point(&envelope(&family, false), level);
        let of_inf = pseudo_inverse_point(&envelope(&family, true), level);
        check(of_sup <= lo && lo <= hi && hi <= of_inf);
        check(hi == of_inf);

        // right continuity: the infimum is attained
        let q = pseudo_inverse_point(&f, level);
        if q.is_finite() {
            check(f.eval(q) >= level && f.breakpoints().iter().filter(|b| **b < q).all(|b| f.eval(*b) < level));
        }

        // (f o g)^- = g^- o f^- for g(x) = 4x - 3, exact on the dyadic grid
        let g_inv = |y: f64| (y + 3.0) / 4.0;
        let composed = StepFunction::new(
            f.breakpoints().iter().map(|&b| g_inv(b)).collect(),
            f.breakpoints().iter().map(|&b| f.eval(b)).collect(),
            0.0,
        )?;
        check(composed.breakpoints().iter().all(|&b| composed.eval(b) == f.eval(4.0 * b - 3.0)));
        check(pseudo_inverse_point(&composed, level) == g_inv(q));

        check(empirical_quantile(&a, level)?.value == q);
        let (s1, s2) = (r.uniform_open() * 3.0, dyadic(&mut r));
        let phi: Box<dyn Fn(f64) -> f64> = match uniform_index(&mut r, 4) {
            0 => Box::new(move |t| s1 * t + s2),
            1 => Box::new(|t: f64| t * t * t + t),
            2 => Box::new(|t: f64| (t / 8.0).exp()),
            _ => Box::new(f64::floor),
        };
        check(check_transform_invariance(&a, phi, level)?);
    }
    Ok(Outcome::new(
        failures == 0,
        format!("{failures} failures in {checks} checks over {cases} cases"),
        "0 failures",
    ))
}

fn c7_abs_gaussian_cdf() -> Result<Outcome> {
    let mut worst = f64::INFINITY;
    for sigma in [0.5f64, 1.0, 2.0] {
        for i in 1..=30 {
            let r = i as f64 / 10.0;
            let f = erf(r / (sigma * std::f64::consts::SQRT_2));
            let lower = (1.0 - (-r * r / (2.0 * sigma * sigma)).exp()).sqrt();
            let upper = (1.0 - (-2.0 * r * r / (std::f64::consts::PI * sigma * sigma)).exp()).sqrt();
            worst = worst.min(f - lower).min(upper - f);
        }
    }
    Ok(Outcome::new(
        worst >= -1e-12,
        format!("smallest margin {worst:.3e} over 90 points"),
        "margin >= -1e-12",
    ))
}

fn c8_eigen_upper(s: Scale, rng: &RngStream) -> Result<Outcome> {
    let reps = s.pick(5000, 1000);
    let mut worst_ratio = 0.0f64;
    let mut fails = 0;
    let mut cells = 0;
    for d in [2usize, 5] {
        let input = InputDist::standard_gaussian(d)?;
        let params = matrix_params(&input)?;
        for n in [100usize, 1000] {
            for (j, delta) in [0.05, 0.2].into_iter().enumerate() {
                let stream = rng.child((d * 10_000 + n * 10 + j) as u64);
                let q = min_eig_quantile_mc(&input, n, delta, reps, &stream)?;
                let bound = upper_bound_eig(&params, n, d, delta)?;
                cells += 1;
                fails += usize::from(q.value > bound + 3.0 * q.se_proxy);
                worst_ratio = worst_ratio.max(q.value / bound);
            }
        }
    }
    Ok(Outcome::new(
        fails == 0,
        format!("{fails} of {cells} cells above the bound; largest quantile/bound {worst_ratio:.3}"),
        "quantile <= bound + 3 se in every cell",
    ))
}

fn grid_oracle(white: &[f64], k: usize) -> f64 {
    let n = white.len() / 2;
    (0..4096)
        .map(|i| {
            let a = std::f64::consts::PI * i as f64 / 4096.0;
            let (c, s) = (a.cos(), a.sin());
            let sq: Vec<f64> = white.chunks_exact(2).map(|x| (c * x[0] + s * x[1]).powi(2)).collect();
            middle_sum(&sq, k).expect("k below n/2") / n as f64
        })
        .fold(f64::INFINITY, f64::min)
}

fn c9_trimmed_inf(s: Scale, rng: &RngStream) -> Result<Outcome> {
    let (datasets, reps) = s.pick((50, 1000), (10, 200));
    let mut r = rng.child(0);
    let sigma = SymMatrix::identity(2);
    let mut max_gap = 0.0f64;
    for _ in 0..datasets {
        let mut xs = vec![0.0; 200];
        r.fill_normal(&mut xs);
        let got = trimmed_directional_inf(&xs, 2, &sigma, 5, 16, &mut r)?;
        max_gap = max_gap.max((got - grid_oracle(&xs, 5)).abs());
    }
    // k = 8 ln(2 / delta) = 24
    let (n, k) = (4096usize, 24usize);
    let delta = 2.0 * (-(k as f64) / 8.0).exp();
    let input = InputDist::standard_gaussian(2)?;
    let params = matrix_params(&input)?;
    let rep = eigen_report(&input, n, delta, reps, Some((k, 4)), &rng.child(1))?;
    let q = rep.trimmed_inf_quantile.expect("trim requested");
    let nf = n as f64;
    let bound = 100.0
        * ((8.0 * (12.0f64).ln() * (params.lambda_max_s + 1.0) / nf).sqrt()
            + ((params.r + 1.0) * (1.0 / delta).ln() / nf).sqrt());
    Ok(Outcome::new(
        max_gap <= 1e-3 && q.value <= bound,
        format!("max gap to grid {max_gap:.2e}; trimmed quantile {:.4} vs bound {bound:.3}", q.value),
        "gap <= 1e-3, quantile <= bound",
    ))
}

fn c10_variance(s: Scale, rng: &RngStream) -> Result<Outcome> {
    let (reps, tol) = s.pick((100_000, 0.02), (20_000, 0.05));
    let (n, delta) = (10, 0.05);
    let (_, t_star) = minimax_variance_weight(n, delta)?;
    let (mm, plain) = variance_losses(n, delta, 1.0, reps, &rng.child(0))?;
    let q_mm = empirical_quantile(&EmpiricalDistribution::new(mm)?, 1.0 - delta)?;
    let q_plain = empirical_quantile(&EmpiricalDistribution::new(plain)?, 1.0 - delta)?;
    let rel = (q_mm.value - t_star).abs() / t_star;
    let margin = (q_plain.value - q_mm.value) / q_mm.combined_se(&q_plain);

    // scale equivariance, exact for powers of two
    let mut r = rng.child(1);
    let mut equivariant = true;
    for _ in 0..100 {
        let mut x = vec![0.0; n];
        r.fill_normal(&mut x);
        let base = minimax_variance_estimate(&x, 0.0, delta)?.value;
        for c in [2.0f64, 0.5, 8.0] {
            let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
            equivariant &= minimax_variance_estimate(&cx, 0.0, delta)?.value == c * c * base;
        }
    }

    let mut worst_trip = 0.0f64;
    for alpha in [0.5, 1.0, 2.5, 5.0, 50.0] {
        for level in [0.05, 0.5, 0.9, 0.99] {
            worst_trip = worst_trip.max((p_alpha(p_alpha_inverse(level, alpha)?, alpha)? - level).abs());
        }
    }
    Ok(Outcome::new(
        rel <= tol && margin >= 3.0 && equivariant && worst_trip <= 1e-10,
        format!(
            "risk {:.5} vs t* {t_star:.5} (rel. {rel:.2e}); plain {:.5} is {margin:.1} se worse; round trip {worst_trip:.1e}; equivariant {equivariant}",
            q_mm.value, q_plain.value
        ),
        format!("rel. <= {tol}, >= 3 se worse, round trip <= 1e-10, exact equivariance"),
    ))
}

fn c11_robust(s: Scale, rng: &RngStream) -> Result<Outcome> {
    let mut y = vec![1.0; 64];
    for i in [3, 17, 40, 62] {
        y[i] = 1e6;
    }
    let data = Dataset::new(vec![1.0; 64], y, 1)?;
    let ols_err = (ols_fit(&data).w_hat[0] - 1.0).abs();
    let mm_err = (minmax_fit(&data, ErrorFn::Square, &MinMaxConfig::new(TrimLevel::new(5, 64)?))?.w_hat[0] - 1.0).abs();
    let planted_ok = mm_err <= 0.05 && ols_err > 1e4;

    let reps = s.pick(200, 100);
    let (n, d, delta) = (5000usize, 2usize, 0.05);
    let input = InputDist::standard_gaussian(d)?;
    let spec = ProblemSpec::new(input.clone(), vec![1.0, -1.0], NoiseModel::student_t(3.0, 1.0)?, ErrorFn::Square)?;
    let member = class_membership_check(&spec, DistClass::P2 { sigma2: 1.0 })?.member;
    let bound = guarantee_rhs(ErrorFn::Square, &matrix_params(&input)?, 1.0, None, n, d, delta)?.risk_bound;
    let stream = rng.child(0);
    let mm = quantile_risk_mc(&spec, &Estimator::MinMax(MinMaxConfig::for_delta(delta, n)?), n, delta, reps, &stream)?;
    let ols = quantile_risk_mc(&spec, &Estimator::Ols, n, delta, reps, &stream)?;
    let (qm, qo) = (mm.quantile_risk.value, ols.quantile_risk.value);
    Ok(Outcome::new(
        planted_ok && member && qm <= bound && qm <= qo,
        format!(
            "planted: minmax off by {mm_err:.1e}, OLS by {ols_err:.1e}; heavy tails: minmax {qm:.4e}, OLS {qo:.4e}, bound {bound:.3}"
        ),
        "minmax within 0.05, OLS > 1e4; minmax <= bound and <= OLS",
    ))
}

fn c12_infinite(s: Scale, rng: &RngStream) -> Result<Outcome> {
    let reps = s.pick(20_000, 2_000);
    let input = InputDist::bernoulli(0.5)?;
    let n = 6;
    let eps = singularity_prob(&input, n, 1000, &rng.child(0))?;
    let at_small = gauss_minimax_exact_mc(&input, ErrorFn::Square, 1.0, n, 0.01, reps, &rng.child(1))?;
    let at_large = gauss_minimax_exact_mc(&input, ErrorFn::Square, 1.0, n, 0.1, reps, &rng.child(2))?;
    Ok(Outcome::new(
        eps.exact && eps.value == 0.5f64.powi(6) && at_small.is_infinite() && at_large.value.is_finite(),
        format!(
            "eps {} (exact {}); risk at 0.01 {}, at 0.1 {:.4}",
            eps.value, eps.exact, at_small.value, at_large.value
        ),
        "eps = 2^-6 exactly, inf at 0.01, finite at 0.1",
    ))
}

/// `E|Z|^q` by Gauss-Legendre on unit panels over `[0, 40]`. The first panel
/// uses `z = u^2` so fractional powers stay smooth at zero.
fn abs_moment_by_quadrature(q: f64) -> f64 {
    let rule = GaussLegendre::new(64);
    let dens = |z: f64| (-0.5 * z * z).exp() * (2.0 / std::f64::consts::PI).sqrt();
    let first = rule.integrate(0.0, 1.0, |u| 2.0 * u.powf(2.0 * q + 1.0) * dens(u * u));
    first + (1..40).map(|j| rule.integrate(j as f64, (j + 1) as f64, |z| z.powf(q) * dens(z))).sum::<f64>()
}

fn c13_pnorm(s: Scale, rng: &RngStream) -> Result<Outcome> {
    let reps = s.pick(20_000, 4_000);
    let (p, n, delta) = (4.0, 400, 0.1);
    let q = gauss_minimax_exact_mc(&InputDist::constant_one(), ErrorFn::p_power(p)?, 1.0, n, delta, reps, rng)?;
    let lb = pnorm_lower_bound(p, 1.0, 1, n, delta)?;
    let k4 = k_constant(4.0)?;
    let mut worst = 0.0f64;
    for m in [0.5, 1.5, 2.0, 2.5, 4.0, 6.0, 7.0] {
        let closed = std_normal_abs_moment(m)?;
        worst = worst.max((closed - abs_moment_by_quadrature(m)).abs() / closed);
    }
    Ok(Outcome::new(
        q.value >= lb - 3.0 * q.se_proxy && (k4 - 135.0).abs() <= 1e-12 && worst <= 1e-10,
        format!("exact {:.4e} vs lower bound {lb:.4e}; K(4) = {k4}; moment rel. err {worst:.1e}", q.value),
        "exact >= bound - 3 se, K(4) = 135, moments within 1e-10",
    ))
}
