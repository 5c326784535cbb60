use super::excess::ExcessErrorOracle;
use crate::distributions::InputDist;
use crate::error::{invalid, Error, Result};
use crate::estimators::ErrorFn;
use crate::mc;
use crate::numerics::linalg::dot;
use crate::numerics::{chi_square_quantile, cholesky, std_normal_abs_moment, sym_eigen, RngStream, SymMatrix};
use crate::quantile::{empirical_quantile, EmpiricalDistribution, QuantileEstimate};

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(format!("delta must be in (0, 1), got {delta}")))
    }
}

/// Minimax quantile risk over the Gaussian-noise class with inputs `input`:
/// the `(1 - delta)`-quantile of `E~(Z)`, `Z | X_1..X_n ~ N(0, (sigma2/n) Sigma_hat^{-1})`,
/// with `E~(Z) = inf` on singular designs.
///
/// Square error uses `(sigma2 / 2n) |A|^2`, `A ~ N(0, Sigma~_n^{-1})`.
pub fn gauss_minimax_exact_mc(
    input: &InputDist,
    error: ErrorFn,
    sigma2: f64,
    n: usize,
    delta: f64,
    reps: usize,
    rng: &RngStream,
) -> Result<QuantileEstimate> {
    check_delta(delta)?;
    if reps < 100 {
        return invalid(format!("need at least 100 replicates, got {reps}"));
    }
    if n == 0 {
        return invalid("sample size must be positive");
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return invalid(format!("sigma2 must be positive, got {sigma2}"));
    }
    let d = input.dim();
    let whiten = input.covariance().inverse_sqrt()?;
    let oracle = match error {
        ErrorFn::Square => None,
        ErrorFn::PPower(_) => Some(ExcessErrorOracle::gaussian_noise(input.clone(), error, sigma2)?),
    };
    let scale = sigma2 / n as f64;
    let losses = mc::replicate(rng, reps, |_, r| -> Result<f64> {
        if n < d {
            return Ok(f64::INFINITY);
        }
        let xs = input.sample_inputs(n, r);
        let white = SymMatrix::gram(&xs, d, 1.0 / n as f64).congruence(&whiten);
        if sym_eigen(&white).is_rank_deficient() {
            return Ok(f64::INFINITY);
        }
        let chol = match cholesky(&white) {
            Ok(c) => c,
            Err(_) => return Ok(f64::INFINITY),
        };
        let mut g = vec![0.0; d];
        r.fill_normal(&mut g);
        // A = L^{-T} g has covariance (L L^T)^{-1}
        let a = chol.solve_upper_transposed(&g);
        match &oracle {
            None => Ok(0.5 * scale * dot(&a, &a)),
            Some(o) => {
                let z: Vec<f64> = whiten.matvec(&a).iter().map(|v| v * scale.sqrt()).collect();
                o.excess_of_offset(&z)
            }
        }
    });
    let losses = losses.into_iter().collect::<Result<Vec<f64>>>()?;
    empirical_quantile(&EmpiricalDistribution::new(losses)?, 1.0 - delta)
}

/// `lim n R* = sigma2 * alpha * Q_{chi2_d}(1 - delta)` with `alpha = E[e''(eta)] / 2`.
pub fn asymptotic_minimax(error: ErrorFn, sigma2: f64, d: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if d == 0 {
        return invalid("dimension must be positive");
    }
    Ok(sigma2 * error.gaussian_curvature(sigma2)? * chi_square_quantile(1.0 - delta, d as f64)?)
}

/// `m(p - 2) / (16 (p - 1)) * sigma^p (d + log(1/delta)) / n` for `delta < 1/2`.
pub fn pnorm_lower_bound(p: f64, sigma2: f64, d: usize, n: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidLevel(format!("the lower bound needs delta in (0, 1/2), got {delta}")));
    }
    if !(p > 2.0) || !p.is_finite() {
        return invalid(format!("p must be finite and > 2, got {p}"));
    }
    if n == 0 || d == 0 {
        return invalid("n and d must be positive");
    }
    let coef = std_normal_abs_moment(p - 2.0)? / (16.0 * (p - 1.0));
    Ok(coef * sigma2.sqrt().powf(p) * (d as f64 + (1.0 / delta).ln()) / n as f64)
}
