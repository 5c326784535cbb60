use crate::error::{invalid, Result};
use crate::numerics::std_normal_abs_moment;

/// Per-sample error `e(t)` of a residual `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorFn {
    /// `t^2 / 2`
    Square,
    /// `|t|^p / (p (p - 1))` for `p > 2`
    PPower(f64),
}

impl ErrorFn {
    pub fn p_power(p: f64) -> Result<Self> {
        if !(p > 2.0) || !p.is_finite() {
            return invalid(format!("p-power error needs finite p > 2, got {p}"));
        }
        Ok(ErrorFn::PPower(p))
    }

    /// Exponent of the error: 2 for square error.
    pub fn exponent(&self) -> f64 {
        match self {
            ErrorFn::Square => 2.0,
            ErrorFn::PPower(p) => *p,
        }
    }

    /// `1 / (p (p - 1))`, so that `e(t) = norm |t|^p`.
    pub fn normalizer(&self) -> f64 {
        let p = self.exponent();
        1.0 / (p * (p - 1.0))
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            ErrorFn::Square => 0.5 * t * t,
            ErrorFn::PPower(p) => t.abs().powf(*p) / (p * (p - 1.0)),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            ErrorFn::Square => t,
            ErrorFn::PPower(p) => t.signum() * t.abs().powf(p - 1.0) / (p - 1.0),
        }
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        match self {
            ErrorFn::Square => 1.0,
            ErrorFn::PPower(p) => t.abs().powf(p - 2.0),
        }
    }

    /// `E[e''(eta)] / 2` for `eta ~ N(0, sigma2)`.
    pub fn gaussian_curvature(&self, sigma2: f64) -> Result<f64> {
        match self {
            ErrorFn::Square => Ok(0.5),
            ErrorFn::PPower(p) => Ok(0.5 * std_normal_abs_moment(p - 2.0)? * sigma2.sqrt().powf(p - 2.0)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ErrorFn::Square => "square".into(),
            ErrorFn::PPower(p) => format!("p-power:{p}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_and_derivatives() {
        assert_eq!(ErrorFn::Square.value(3.0), 4.5);
        let e = ErrorFn::p_power(4.0).unwrap();
        assert_eq!(e.value(-2.0), 16.0 / 12.0);
        assert_eq!(e.value(0.0), 0.0);
        for t in [-1.3, -0.2, 0.4, 2.0] {
            let h = 1e-6;
            let fd = (e.value(t + h) - e.value(t - h)) / (2.0 * h);
            assert!((fd - e.derivative(t)).abs() < 1e-8);
            let fd2 = (e.derivative(t + h) - e.derivative(t - h)) / (2.0 * h);
            assert!((fd2 - e.second_derivative(t)).abs() < 1e-7);
            assert_eq!(e.value(t), e.value(-t));
        }
        assert!(ErrorFn::p_power(2.0).is_err());
        assert!(ErrorFn::p_power(f64::NAN).is_err());
    }

    #[test]
    fn curvature_of_quartic_matches_square() {
        let e = ErrorFn::p_power(4.0).unwrap();
        assert!((e.gaussian_curvature(1.0).unwrap() - 0.5).abs() < 1e-14);
        assert!((e.gaussian_curvature(4.0).unwrap() - 2.0).abs() < 1e-13);
    }
}
