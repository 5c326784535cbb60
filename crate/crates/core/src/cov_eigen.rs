//! Smallest eigenvalue of the whitened sample covariance: Monte Carlo
//! quantiles, the non-asymptotic upper bound, the trimmed directional
//! infimum and the critical sample size.

use crate::distributions::{matrix_params, InputDist, MatrixParams};
use crate::error::{invalid, Error, Result};
use crate::mc;
use crate::numerics::linalg::{dot, norm};
use crate::numerics::{sym_eigen, RngStream, SymMatrix};
use crate::quantile::{empirical_quantile, EmpiricalDistribution, QuantileEstimate};
use crate::truncation::middle_sum;

/// `Sigma^{-1/2} Sigma_hat_n Sigma^{-1/2}` for row-major inputs `xs`.
pub fn whitened_sample_cov(xs: &[f64], d: usize, sigma: &SymMatrix) -> Result<SymMatrix> {
    let w = whitener(xs, d, sigma)?;
    let n = xs.len() / d;
    Ok(SymMatrix::gram(xs, d, 1.0 / n as f64).congruence(&w))
}

fn whitener(xs: &[f64], d: usize, sigma: &SymMatrix) -> Result<SymMatrix> {
    if d == 0 || sigma.dim() != d {
        return invalid("covariance dimension does not match the inputs");
    }
    if xs.is_empty() || !xs.len().is_multiple_of(d) {
        return invalid(format!("{} values do not form rows of length {d}", xs.len()));
    }
    sigma.inverse_sqrt()
}

/// `lambda_min` clipped at zero; exactly zero for rank-deficient designs.
fn min_eig(m: &SymMatrix) -> f64 {
    let spec = sym_eigen(m);
    if spec.is_rank_deficient() {
        0.0
    } else {
        spec.min().max(0.0)
    }
}

/// Lower empirical `(1 - delta)`-quantile of `1 - lambda_min(Sigma~_n)`.
pub fn min_eig_quantile_mc(input: &InputDist, n: usize, delta: f64, reps: usize, rng: &RngStream) -> Result<QuantileEstimate> {
    check_args(n, delta)?;
    if reps < 100 {
        return invalid(format!("need at least 100 replicates, got {reps}"));
    }
    let d = input.dim();
    let w = input.covariance().inverse_sqrt()?;
    let values = mc::replicate(rng, reps, |_, r| {
        if n < d {
            return 1.0;
        }
        let xs = input.sample_inputs(n, r);
        1.0 - min_eig(&SymMatrix::gram(&xs, d, 1.0 / n as f64).congruence(&w))
    });
    empirical_quantile(&EmpiricalDistribution::new(values)?, 1.0 - delta)
}

fn check_args(n: usize, delta: f64) -> Result<()> {
    if n == 0 {
        return invalid("sample size must be positive");
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidLevel(format!("delta must be in (0, 1), got {delta}")));
    }
    Ok(())
}

/// `sqrt(8 lambda_max(S) log(3d) / n) + sqrt(2 R log(1/delta) / n)
///  + (2 log(3d) + 4 log(1/delta)) / 3n`.
pub fn upper_bound_eig(params: &MatrixParams, n: usize, d: usize, delta: f64) -> Result<f64> {
    check_args(n, delta)?;
    if d == 0 {
        return invalid("dimension must be positive");
    }
    let n = n as f64;
    let l3d = (3.0 * d as f64).ln();
    let ld = (1.0 / delta).ln();
    Ok((8.0 * params.lambda_max_s * l3d / n).sqrt()
        + (2.0 * params.r * ld / n).sqrt()
        + (2.0 * l3d + 4.0 * ld) / (3.0 * n))
}

/// `n^{-1} sum_{i=k+1}^{n-k} (<v, x_i>^2)*` and a subgradient in `v`.
fn trimmed_quadratic(white: &[f64], d: usize, k: usize, v: &[f64], proj: &mut Vec<(f64, usize)>) -> (f64, Vec<f64>) {
    let n = white.len() / d;
    proj.clear();
    proj.extend(white.chunks_exact(d).map(|x| dot(v, x)).map(|t| t * t).zip(0..));
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k > 0 {
        proj.select_nth_unstable_by(k - 1, cmp);
        proj[k..].select_nth_unstable_by(n - 2 * k, cmp);
    }
    let mut value = 0.0;
    let mut grad = vec![0.0; d];
    for &(sq, i) in &proj[k..n - k] {
        value += sq;
        let x = &white[i * d..(i + 1) * d];
        let c = 2.0 * dot(v, x);
        grad.iter_mut().zip(x).for_each(|(g, xj)| *g += c * xj);
    }
    let nf = n as f64;
    grad.iter_mut().for_each(|g| *g /= nf);
    (value / nf, grad)
}

/// Unit eigenvector for the smallest eigenvalue of the second-moment matrix
/// of the rows currently in the middle block.
fn middle_block_eigvec(white: &[f64], d: usize, k: usize, proj: &[(f64, usize)]) -> Vec<f64> {
    let n = white.len() / d;
    let rows: Vec<f64> = proj[k..n - k].iter().flat_map(|&(_, i)| white[i * d..(i + 1) * d].iter().copied()).collect();
    sym_eigen(&SymMatrix::gram(&rows, d, 1.0)).vector(0)
}

/// `inf_{|v| = 1} n^{-1} sum_{i=k+1}^{n-k} (<v, X~_i>^2)*` over the whitened
/// inputs.
///
/// `k = 0` is the smallest eigenvalue; `d = 1` is exact. Otherwise projected
/// subgradient descent on the sphere (200 steps of angle `0.5 / sqrt(t)`)
/// from the bottom eigenvector and `multistarts - 1` random directions, each
/// followed by a polish that moves to the bottom eigenvector of the current
/// middle block while that lowers the value. The result is attained by some
/// unit vector, hence an upper bound on the infimum.
pub fn trimmed_directional_inf(
    xs: &[f64],
    d: usize,
    sigma: &SymMatrix,
    k: usize,
    multistarts: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let w = whitener(xs, d, sigma)?;
    let n = xs.len() / d;
    if 2 * k >= n {
        return invalid(format!("trim level {k} leaves no middle block for n={n}"));
    }
    let white: Vec<f64> = xs.chunks_exact(d).flat_map(|x| w.matvec(x)).collect();
    let cov = SymMatrix::gram(&white, d, 1.0 / n as f64);
    if k == 0 {
        return Ok(sym_eigen(&cov).min());
    }
    if d == 1 {
        let sq: Vec<f64> = white.iter().map(|x| x * x).collect();
        return Ok(middle_sum(&sq, k)? / n as f64);
    }
    let mut starts = vec![sym_eigen(&cov).vector(0)];
    for _ in 1..multistarts.max(1) {
        let mut v = vec![0.0; d];
        rng.fill_normal(&mut v);
        starts.push(v);
    }
    let mut proj = Vec::with_capacity(n);
    let mut best = f64::INFINITY;
    for start in starts {
        let len = norm(&start);
        if !(len > 0.0) {
            continue;
        }
        let mut v: Vec<f64> = start.iter().map(|x| x / len).collect();
        let (mut val, mut grad) = trimmed_quadratic(&white, d, k, &v, &mut proj);
        let mut local = (val, v.clone());
        for t in 1..=200 {
            let radial = dot(&grad, &v);
            let tangent: Vec<f64> = grad.iter().zip(&v).map(|(g, vi)| g - radial * vi).collect();
            let tn = norm(&tangent);
            if !(tn > 1e-14) {
                break;
            }
            let step = 0.5 / (t as f64).sqrt();
            v.iter_mut().zip(&tangent).for_each(|(vi, g)| *vi -= step * g / tn);
            let l = norm(&v);
            v.iter_mut().for_each(|x| *x /= l);
            (val, grad) = trimmed_quadratic(&white, d, k, &v, &mut proj);
            if val < local.0 {
                local = (val, v.clone());
            }
        }
        let mut val = trimmed_quadratic(&white, d, k, &local.1, &mut proj).0;
        for _ in 0..50 {
            let u = middle_block_eigvec(&white, d, k, &proj);
            let (uval, _) = trimmed_quadratic(&white, d, k, &u, &mut proj);
            if uval < val {
                val = uval;
            } else {
                break;
            }
        }
        best = best.min(val);
    }
    Ok(best)
}

/// Monte Carlo summary of the smallest-eigenvalue quantities at one `(n, delta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenQuantileReport {
    pub n: usize,
    pub d: usize,
    pub delta: f64,
    /// Of `1 - lambda_min(Sigma~_n)` at level `1 - delta`.
    pub empirical_quantile: QuantileEstimate,
    pub upper_bound: f64,
    /// Of `(1 - 2k/n) - lambda_bar_min` at level `1 - delta`, when a trim is given.
    pub trimmed_inf_quantile: Option<QuantileEstimate>,
    pub reps: usize,
}

/// One pass over `reps` designs computing both eigenvalue quantities.
pub fn eigen_report(
    input: &InputDist,
    n: usize,
    delta: f64,
    reps: usize,
    trim: Option<(usize, usize)>,
    rng: &RngStream,
) -> Result<EigenQuantileReport> {
    check_args(n, delta)?;
    if reps < 100 {
        return invalid(format!("need at least 100 replicates, got {reps}"));
    }
    let d = input.dim();
    let sigma = input.covariance();
    let w = sigma.inverse_sqrt()?;
    if let Some((k, _)) = trim {
        if 2 * k >= n {
            return invalid(format!("trim level {k} leaves no middle block for n={n}"));
        }
    }
    let pairs = mc::replicate(rng, reps, |_, r| -> Result<(f64, Option<f64>)> {
        if n < d {
            let t = trim.map(|(k, _)| 1.0 - 2.0 * k as f64 / n as f64);
            return Ok((1.0, t));
        }
        let xs = input.sample_inputs(n, r);
        let lmin = min_eig(&SymMatrix::gram(&xs, d, 1.0 / n as f64).congruence(&w));
        let t = match trim {
            Some((k, starts)) => {
                let inf = trimmed_directional_inf(&xs, d, sigma, k, starts, r)?;
                Some(1.0 - 2.0 * k as f64 / n as f64 - inf)
            }
            None => None,
        };
        Ok((1.0 - lmin, t))
    });
    let pairs = pairs.into_iter().collect::<Result<Vec<_>>>()?;
    let level = 1.0 - delta;
    let empirical = empirical_quantile(&EmpiricalDistribution::new(pairs.iter().map(|p| p.0).collect())?, level)?;
    let trimmed = match trim {
        Some(_) => Some(empirical_quantile(
            &EmpiricalDistribution::new(pairs.iter().filter_map(|p| p.1).collect())?,
            level,
        )?),
        None => None,
    };
    Ok(EigenQuantileReport {
        n,
        d,
        delta,
        empirical_quantile: empirical,
        upper_bound: upper_bound_eig(&matrix_params(input)?, n, d, delta)?,
        trimmed_inf_quantile: trimmed,
        reps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSampleSize {
    pub n: usize,
    /// Probe at `n`: the `(1 - delta/2)`-quantile of `1 - lambda_min`.
    pub at_n: QuantileEstimate,
    /// Probe at `n - 1`, absent when `n = 1`.
    pub below_n: Option<QuantileEstimate>,
    /// The re-run probe at `n` on an independent stream is also `<= 1/4`.
    pub verified: bool,
}

/// `min{n : Q_{1 - lambda_min(Sigma~_n)}(1 - delta/2) <= 1/4}` by doubling then
/// bisection, each probe a Monte Carlo quantile on the child stream `n` of
/// `rng`. The probe is assumed monotone in `n`.
pub fn critical_sample_size(
    input: &InputDist,
    delta: f64,
    reps: usize,
    max_n: usize,
    rng: &RngStream,
) -> Result<CriticalSampleSize> {
    check_args(1, delta)?;
    let probe = |n: usize| min_eig_quantile_mc(input, n, delta / 2.0, reps, &rng.child(n as u64));
    let mut hi = 1;
    let mut at_hi = probe(hi)?;
    while at_hi.value > 0.25 {
        if hi >= max_n {
            return Err(Error::BudgetExceeded(format!("no n <= {max_n} reaches 1/4")));
        }
        hi = (2 * hi).min(max_n);
        at_hi = probe(hi)?;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let q = probe(mid)?;
        if q.value <= 0.25 {
            hi = mid;
            at_hi = q;
        } else {
            lo = mid;
        }
    }
    let below_n = if hi > 1 { Some(probe(hi - 1)?) } else { None };
    let recheck = min_eig_quantile_mc(input, hi, delta / 2.0, reps, &rng.child(u64::MAX - hi as u64))?;
    Ok(CriticalSampleSize {
        n: hi,
        at_n: at_hi,
        below_n,
        verified: recheck.value <= 0.25,
    })
}
