use crate::error::{invalid, Error, Result};
use crate::numerics::{reg_lower_gamma, sinhc};

/// `P((1 - e^{-2t}) / 2t <= Z <= (e^{2t} - 1) / 2t)` for `Z ~ Inv-Gamma(alpha, alpha)`.
///
/// Evaluated through `G = alpha / Z ~ Gamma(alpha, 1)`, so the interval for
/// `Z` becomes `[alpha / upper, alpha / lower]` for `G`.
pub fn p_alpha(t: f64, alpha: f64) -> Result<f64> {
    if !(t > 0.0) {
        return invalid(format!("p_alpha needs t > 0, got {t}"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return invalid(format!("p_alpha needs a positive finite alpha, got {alpha}"));
    }
    let lower = -(-2.0 * t).exp_m1() / (2.0 * t);
    let upper = (2.0 * t).exp_m1() / (2.0 * t);
    let hi = reg_lower_gamma(alpha, alpha / lower)?;
    let lo = match upper.is_finite() {
        true => reg_lower_gamma(alpha, alpha / upper)?,
        false => 0.0,
    };
    Ok((hi - lo).clamp(0.0, 1.0))
}

/// Smallest `t` with `p_alpha(t) >= level`, by bisection.
pub fn p_alpha_inverse(level: f64, alpha: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(format!("level must be in (0, 1), got {level}")));
    }
    let mut hi = 1.0;
    while p_alpha(hi, alpha)? < level {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::BudgetExceeded(format!("no t reaches level {level} for alpha={alpha}")));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-15 * hi.max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if p_alpha(mid, alpha)? >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimate {
    pub value: f64,
    /// `sinh(t*) / t*` with `t* = p_{n/2}^-(1 - delta)`.
    pub weight: f64,
    /// Minimax worst-case risk `t*` of the estimator.
    pub risk: f64,
    /// All samples equal `mu`; `value` is 0.
    pub degenerate: bool,
}

/// Weight and worst-case risk for `n` samples at confidence `1 - delta`.
pub fn minimax_variance_weight(n: usize, delta: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return invalid("need at least one sample");
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidLevel(format!("delta must be in (0, 1), got {delta}")));
    }
    let t = p_alpha_inverse(1.0 - delta, n as f64 / 2.0)?;
    Ok((sinhc(t), t))
}

/// Sample second moment about the known mean `mu`, reweighted by `sinh(t*) / t*`.
pub fn minimax_variance_estimate(samples: &[f64], mu: f64, delta: f64) -> Result<VarianceEstimate> {
    if samples.iter().any(|x| !x.is_finite()) || !mu.is_finite() {
        return invalid("samples and mu must be finite");
    }
    let (weight, risk) = minimax_variance_weight(samples.len(), delta)?;
    let second = samples.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / samples.len() as f64;
    Ok(VarianceEstimate {
        value: second * weight,
        weight,
        risk,
        degenerate: second == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_alpha_limits_and_monotonicity() {
        assert!(p_alpha(1e-6, 5.0).unwrap() < 1e-3);
        assert!(p_alpha(50.0, 5.0).unwrap() > 1.0 - 1e-6);
        assert!(p_alpha(1.0, 5.0).unwrap() < p_alpha(2.0, 5.0).unwrap());
        assert!(p_alpha(0.0, 5.0).is_err());
        assert!(p_alpha(-1.0, 5.0).is_err());
        assert_eq!(p_alpha(1000.0, 5.0).unwrap(), 1.0);
    }

    #[test]
    fn p_alpha_matches_quadrature_of_the_density() {
        // inverse-gamma(a, a) density integrated on a fine grid
        let (t, a) = (0.4_f64, 3.5_f64);
        let (l, u) = ((1.0 - (-2.0 * t).exp()) / (2.0 * t), ((2.0 * t).exp() - 1.0) / (2.0 * t));
        let ln_norm = a * a.ln() - crate::numerics::ln_gamma(a);
        let pdf = |z: f64| (ln_norm - (a + 1.0) * z.ln() - a / z).exp();
        let m = 20_000;
        let h = (u - l) / m as f64;
        let mut s = pdf(l) + pdf(u);
        for i in 1..m {
            s += pdf(l + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let simpson = s * h / 3.0;
        assert!((p_alpha(t, a).unwrap() - simpson).abs() < 1e-11);
    }

    #[test]
    fn inverse_round_trip() {
        let t = p_alpha_inverse(0.9, 5.0).unwrap();
        assert!((p_alpha(t, 5.0).unwrap() - 0.9).abs() <= 1e-10);
        assert!(p_alpha_inverse(0.5, 5.0).unwrap() < p_alpha_inverse(0.99, 5.0).unwrap());
        assert!(p_alpha_inverse(0.9, 50.0).unwrap() < p_alpha_inverse(0.9, 5.0).unwrap());
        for (alpha, level) in [(0.5, 0.1), (1.0, 0.999), (500.0, 0.95), (5e5, 0.95), (2.0, 1e-6)] {
            let t = p_alpha_inverse(level, alpha).unwrap();
            assert!((p_alpha(t, alpha).unwrap() - level).abs() <= 1e-10, "{alpha} {level}");
        }
        assert!(p_alpha_inverse(1.0, 5.0).is_err());
    }

    #[test]
    fn weight_behaviour() {
        assert!((sinhc(1e-8) - 1.0).abs() < 1e-15);
        let (w, t) = minimax_variance_weight(10, 0.05).unwrap();
        assert_eq!(w, t.sinh() / t);
        assert!(w > 1.0);
        let samples: Vec<f64> = (0..1_000_000).map(|i| ((i % 7) as f64 - 3.0) * 0.5).collect();
        let est = minimax_variance_estimate(&samples, 0.0, 0.05).unwrap();
        let plain = samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64;
        assert!((est.value / plain - 1.0).abs() < 0.01);
    }

    #[test]
    fn scale_equivariance_and_degenerate() {
        let xs = [1.25, -0.5, 3.0, 2.0, -1.75];
        let mu = 0.5;
        let c = 4.0;
        let a = minimax_variance_estimate(&xs, mu, 0.1).unwrap();
        let scaled: Vec<f64> = xs.iter().map(|x| mu + c * (x - mu)).collect();
        let b = minimax_variance_estimate(&scaled, mu, 0.1).unwrap();
        assert_eq!(b.value, c * c * a.value);
        let d = minimax_variance_estimate(&[2.0, 2.0], 2.0, 0.1).unwrap();
        assert!(d.degenerate && d.value == 0.0);
    }
}
