//! Gamma-family special functions.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Gamma(x)` for `x > 0` (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return (PI / (PI * x).sin()).abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 100_000;

fn gamma_prefactor(a: f64, x: f64) -> f64 {
    (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn lower_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * gamma_prefactor(a, x)
}

fn upper_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    gamma_prefactor(a, x) * h
}

fn check_gamma_args(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return invalid(format!("gamma shape must be positive and finite, got {a}"));
    }
    if !(x >= 0.0) {
        return invalid(format!("gamma argument must be nonnegative, got {x}"));
    }
    Ok(())
}

/// Regularised lower incomplete gamma `P(a, x)`.
pub fn reg_lower_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    Ok(if x == 0.0 {
        0.0
    } else if x == f64::INFINITY {
        1.0
    } else if x < a + 1.0 {
        lower_series(a, x)
    } else {
        1.0 - upper_continued_fraction(a, x)
    })
}

/// Regularised upper incomplete gamma `Q(a, x) = 1 - P(a, x)`, computed
/// without cancellation in the upper tail.
pub fn reg_upper_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    Ok(if x == 0.0 {
        1.0
    } else if x == f64::INFINITY {
        0.0
    } else if x < a + 1.0 {
        1.0 - lower_series(a, x)
    } else {
        upper_continued_fraction(a, x)
    })
}

/// Error function, via `erf(x) = P(1/2, x^2)`.
pub fn erf(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let v = reg_lower_gamma(0.5, x * x).expect("valid gamma arguments");
    v.copysign(x)
}

/// CDF of `Inv-Gamma(alpha, beta)` at `x`: `1 - P(alpha, beta / x)`.
pub fn inv_gamma_cdf(x: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(x > 0.0) {
        return invalid(format!("inverse-gamma argument must be positive, got {x}"));
    }
    if !(alpha > 0.0) || !(beta > 0.0) {
        return invalid(format!("inverse-gamma parameters must be positive, got ({alpha}, {beta})"));
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    reg_upper_gamma(alpha, beta / x)
}

pub fn chi_square_cdf(x: f64, dof: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    reg_lower_gamma(dof / 2.0, x / 2.0)
}

/// Quantile of the chi-square law by bisection on the regularised gamma.
pub fn chi_square_quantile(level: f64, dof: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return invalid(format!("chi-square level must be in (0, 1), got {level}"));
    }
    if !(dof > 0.0) {
        return invalid(format!("degrees of freedom must be positive, got {dof}"));
    }
    let mut hi = dof.max(1.0);
    while chi_square_cdf(hi, dof)? < level {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi_square_cdf(mid, dof)? < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// `E|Z|^p` for a standard normal `Z`: `2^{p/2} Gamma((p+1)/2) / sqrt(pi)`.
pub fn std_normal_abs_moment(p: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return invalid(format!("moment order must be nonnegative, got {p}"));
    }
    Ok((0.5 * p * 2f64.ln() + ln_gamma(0.5 * (p + 1.0)) - 0.5 * PI.ln()).exp())
}

/// `E|mu + sigma Z|^p` for a standard normal `Z`.
///
/// Uses `sigma^p m(p) e^{-x} 1F1((p+1)/2; 1/2; x)` with `x = mu^2 / (2 sigma^2)`
/// (Kummer's transformation keeps every series term positive); far from the
/// origin the binomial expansion in `sigma / |mu|` is used instead.
pub fn shifted_normal_abs_moment(mu: f64, sigma: f64, p: f64) -> Result<f64> {
    if !(p >= 0.0) || !(sigma >= 0.0) || !mu.is_finite() || !sigma.is_finite() {
        return invalid(format!("bad arguments mu={mu}, sigma={sigma}, p={p}"));
    }
    if sigma == 0.0 {
        return Ok(mu.abs().powf(p));
    }
    let x = 0.5 * (mu / sigma) * (mu / sigma);
    if x <= 300.0 {
        let (a, b) = (0.5 * (p + 1.0), 0.5);
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0;
        loop {
            term *= (a + k) / (b + k) * x / (k + 1.0);
            sum += term;
            k += 1.0;
            if (k > x && term < 1e-17 * sum) || k > 5000.0 {
                break;
            }
        }
        Ok(sigma.powf(p) * std_normal_abs_moment(p)? * (sum.ln() - x).exp())
    } else {
        // E(1 + tZ)^p = sum_j C(p, 2j) (2j - 1)!! t^{2j}, |t| < 0.041
        let t2 = (sigma / mu) * (sigma / mu);
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut j = 0.0;
        while j < 500.0 {
            let (a, b) = (p - 2.0 * j, p - 2.0 * j - 1.0);
            term *= a * b / ((2.0 * j + 1.0) * (2.0 * j + 2.0)) * (2.0 * j + 1.0) * t2;
            sum += term;
            j += 1.0;
            if term.abs() < 1e-17 * sum {
                break;
            }
        }
        Ok(mu.abs().powf(p) * sum)
    }
}

/// `sinh(x) / x`, with the removable singularity at 0 filled in.
pub fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - 0.5 * PI.ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn reg_lower_gamma_examples() {
        let p = reg_lower_gamma(1.0, 1.0).unwrap();
        assert!((p - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
        assert_eq!(reg_lower_gamma(3.0, 0.0).unwrap(), 0.0);
        assert_eq!(reg_lower_gamma(3.0, f64::INFINITY).unwrap(), 1.0);
        // P(1/2, 1) = erf(1)
        assert!((reg_lower_gamma(0.5, 1.0).unwrap() - 0.842_700_792_949_714_9).abs() < 1e-14);
    }

    #[test]
    fn reg_lower_gamma_rejects_bad_shape() {
        assert!(reg_lower_gamma(0.0, 1.0).is_err());
        assert!(reg_lower_gamma(-1.0, 1.0).is_err());
        assert!(reg_lower_gamma(1.0, -1.0).is_err());
    }

    #[test]
    fn reg_lower_gamma_monotone_on_grid() {
        for &a in &[0.1f64, 0.5, 1.0, 2.5, 5.0, 50.0, 500.0] {
            let mut prev = 0.0;
            for i in 0..2000 {
                let x = i as f64 * 0.05 * a.max(1.0);
                let p = reg_lower_gamma(a, x).unwrap();
                assert!(p >= prev - 1e-15, "a={a} x={x}");
                assert!((0.0..=1.0).contains(&p));
                prev = p;
            }
        }
    }

    #[test]
    fn inv_gamma_examples() {
        assert_eq!(inv_gamma_cdf(f64::INFINITY, 2.0, 3.0).unwrap(), 1.0);
        assert!((inv_gamma_cdf(1.0, 1.0, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-14);
        let median = 1.0 / 2f64.ln();
        assert!((inv_gamma_cdf(median, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        assert!(inv_gamma_cdf(0.0, 1.0, 1.0).is_err());
        assert!(inv_gamma_cdf(1.0, 0.0, 1.0).is_err());
        assert!(inv_gamma_cdf(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn inv_gamma_scale_family() {
        for &(alpha, beta, c) in &[(1.0, 1.0, 2.0), (5.0, 5.0, 0.3), (0.7, 2.0, 7.5)] {
            for i in 1..50 {
                let x = i as f64 * 0.2;
                let lhs = inv_gamma_cdf(x, alpha, c * beta).unwrap();
                let rhs = inv_gamma_cdf(x / c, alpha, beta).unwrap();
                assert!((lhs - rhs).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn abs_moment_closed_forms() {
        assert!((std_normal_abs_moment(0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((std_normal_abs_moment(2.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((std_normal_abs_moment(1.0).unwrap() - (2.0 / PI).sqrt()).abs() < 1e-14);
        assert!((std_normal_abs_moment(4.0).unwrap() - 3.0).abs() < 1e-13);
        assert!((std_normal_abs_moment(6.0).unwrap() - 15.0).abs() < 1e-12);
        assert!(std_normal_abs_moment(-0.5).is_err());
    }

    #[test]
    fn chi_square_quantile_inverts_cdf() {
        for &k in &[1.0, 2.0, 5.0, 30.0] {
            for &p in &[0.01, 0.1, 0.5, 0.9, 0.999] {
                let q = chi_square_quantile(p, k).unwrap();
                assert!((chi_square_cdf(q, k).unwrap() - p).abs() < 1e-12);
            }
        }
        // exponential case: Q_{chi2_2}(p) = -2 ln(1 - p)
        let q = chi_square_quantile(0.9, 2.0).unwrap();
        assert!((q + 2.0 * 0.1f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn shifted_moment_matches_quadrature() {
        use crate::numerics::{normal_expectation_piecewise, GaussLegendre};
        let rule = GaussLegendre::new(20);
        for p in [0.5, 1.0, 2.5, 3.0, 4.0, 6.0] {
            for mu in [0.0, 0.3, -1.7, 4.0, 11.0, -30.0] {
                for sigma in [0.2, 1.0, 2.5] {
                    let exact = shifted_normal_abs_moment(mu, sigma, p).unwrap();
                    let quad = normal_expectation_piecewise(&rule, sigma, &[-mu], |t| (mu + t).abs().powf(p));
                    assert!((exact - quad).abs() <= 1e-11 * quad.max(1e-300), "p={p} mu={mu} s={sigma}: {exact} vs {quad}");
                }
            }
        }
        // integer moments: E(mu + Z)^4 = mu^4 + 6 mu^2 + 3
        for mu in [0.0, 1.5, 40.0, 100.0] {
            let v = shifted_normal_abs_moment(mu, 1.0, 4.0).unwrap();
            let expect = mu.powi(4) + 6.0 * mu * mu + 3.0;
            assert!((v - expect).abs() < 1e-13 * expect);
        }
        assert_eq!(shifted_normal_abs_moment(-2.0, 0.0, 3.0).unwrap(), 8.0);
        assert!(shifted_normal_abs_moment(0.0, -1.0, 3.0).is_err());
    }

    #[test]
    fn sinhc_limit() {
        assert_eq!(sinhc(0.0), 1.0);
        assert!((sinhc(1e-8) - 1.0).abs() < 1e-15);
        assert!((sinhc(1.0) - 1f64.sinh()).abs() < 1e-15);
    }
}
