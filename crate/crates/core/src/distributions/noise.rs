use std::f64::consts::PI;

use rand_distr::{Distribution, StudentT};

use crate::error::{invalid, Result};
use crate::numerics::{integrate_graded, ln_gamma, shifted_normal_abs_moment, std_normal_abs_moment, GaussLegendre, RngStream};

/// Symmetric noise `xi`, independent of the inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Gaussian { sigma2: f64 },
    /// Student-t with `nu > 2` degrees of freedom, rescaled to variance `sigma2`.
    ScaledStudentT { nu: f64, sigma2: f64 },
    /// `+-a` with total probability `prob` (half each), `0` otherwise.
    SymmetricTwoPoint { a: f64, prob: f64 },
}

impl NoiseModel {
    pub fn gaussian(sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return invalid(format!("noise variance must be finite and >= 0, got {sigma2}"));
        }
        Ok(NoiseModel::Gaussian { sigma2 })
    }

    pub fn student_t(nu: f64, sigma2: f64) -> Result<Self> {
        if !(nu > 2.0) || !nu.is_finite() {
            return invalid(format!("Student-t noise needs finite nu > 2, got {nu}"));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return invalid(format!("noise variance must be finite and > 0, got {sigma2}"));
        }
        Ok(NoiseModel::ScaledStudentT { nu, sigma2 })
    }

    pub fn two_point(a: f64, prob: f64) -> Result<Self> {
        if !(a >= 0.0) || !a.is_finite() || !(0.0..=1.0).contains(&prob) {
            return invalid(format!("two-point noise needs a >= 0 and prob in [0, 1], got ({a}, {prob})"));
        }
        Ok(NoiseModel::SymmetricTwoPoint { a, prob })
    }

    pub fn label(&self) -> String {
        match self {
            NoiseModel::Gaussian { sigma2 } => format!("gaussian(sigma2={sigma2})"),
            NoiseModel::ScaledStudentT { nu, sigma2 } => format!("student-t(nu={nu}, sigma2={sigma2})"),
            NoiseModel::SymmetricTwoPoint { a, prob } => format!("two-point(a={a}, prob={prob})"),
        }
    }

    /// `E[xi^2]`.
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma2 } | NoiseModel::ScaledStudentT { sigma2, .. } => sigma2,
            NoiseModel::SymmetricTwoPoint { a, prob } => prob * a * a,
        }
    }

    fn t_scale(nu: f64, sigma2: f64) -> f64 {
        (sigma2 * (nu - 2.0) / nu).sqrt()
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma2 } => sigma2.sqrt() * rng.normal(),
            NoiseModel::ScaledStudentT { nu, sigma2 } => {
                let t = StudentT::new(nu).expect("nu validated");
                Self::t_scale(nu, sigma2) * t.sample(rng)
            }
            NoiseModel::SymmetricTwoPoint { a, prob } => {
                let u = rng.uniform_open();
                if u < 0.5 * prob {
                    -a
                } else if u < prob {
                    a
                } else {
                    0.0
                }
            }
        }
    }

    /// `E|xi|^q` for `q >= 0`; infinite when the moment does not exist.
    pub fn abs_moment(&self, q: f64) -> Result<f64> {
        if !(q >= 0.0) {
            return invalid(format!("moment order must be nonnegative, got {q}"));
        }
        Ok(match *self {
            NoiseModel::Gaussian { sigma2 } => {
                if q == 0.0 {
                    1.0
                } else {
                    sigma2.sqrt().powf(q) * std_normal_abs_moment(q)?
                }
            }
            NoiseModel::ScaledStudentT { nu, sigma2 } => {
                if q >= nu {
                    f64::INFINITY
                } else {
                    let s = Self::t_scale(nu, sigma2);
                    let ln = 0.5 * q * nu.ln() + ln_gamma(0.5 * (q + 1.0)) + ln_gamma(0.5 * (nu - q))
                        - 0.5 * PI.ln()
                        - ln_gamma(0.5 * nu);
                    s.powf(q) * ln.exp()
                }
            }
            NoiseModel::SymmetricTwoPoint { a, prob } => {
                if q == 0.0 {
                    1.0
                } else {
                    prob * a.powf(q)
                }
            }
        })
    }

    /// `E|c + s Z + xi|^p` with `Z` standard normal independent of `xi`.
    pub fn shifted_abs_moment(&self, c: f64, s: f64, p: f64, rule: &GaussLegendre) -> Result<f64> {
        match *self {
            NoiseModel::Gaussian { sigma2 } => shifted_normal_abs_moment(c, (s * s + sigma2).sqrt(), p),
            NoiseModel::SymmetricTwoPoint { a, prob } => {
                let g = |u: f64| shifted_normal_abs_moment(u, s, p);
                let mut total = (1.0 - prob) * g(c)?;
                if prob > 0.0 {
                    total += 0.5 * prob * (g(c + a)? + g(c - a)?);
                }
                Ok(total)
            }
            NoiseModel::ScaledStudentT { nu, sigma2 } => {
                if p >= nu {
                    return Ok(f64::INFINITY);
                }
                let tau = Self::t_scale(nu, sigma2);
                let ln_norm = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln();
                // x = tan(theta) maps the real line onto (-pi/2, pi/2)
                let kink = (-c / tau).atan();
                let half = 0.5 * PI;
                let integrand = |theta: f64| {
                    let x = theta.tan();
                    let sec2 = 1.0 + x * x;
                    let dens = (ln_norm - 0.5 * (nu + 1.0) * (1.0 + x * x / nu).ln()).exp();
                    let g = shifted_normal_abs_moment(c + tau * x, s, p).unwrap_or(f64::NAN);
                    g * dens * sec2
                };
                let kinks: &[f64] = if s == 0.0 { &[kink] } else { &[] };
                let v = integrate_graded(rule, -half, half, kinks, true, integrand);
                if v.is_nan() {
                    return invalid("noise expectation did not evaluate");
                }
                Ok(v)
            }
        }
    }
}
