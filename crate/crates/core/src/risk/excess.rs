use crate::distributions::{NoiseModel, ProblemSpec};
use crate::error::{invalid, Result};
use crate::estimators::ErrorFn;
use crate::numerics::GaussLegendre;

/// Excess expected error `E(w) - E(w*)` of a linear model.
///
/// Square error is `(w - w*)^T Sigma (w - w*) / 2` for any centred noise. For
/// p-th power error the law of `<w - w*, X>` is a finite mixture of normals
/// and atoms, so `E e(<w - w*, X> + xi)` is a finite sum of one-dimensional
/// shifted moments and needs no sampling.
#[derive(Debug, Clone)]
pub struct ExcessErrorOracle {
    spec: ProblemSpec,
    rule: GaussLegendre,
    /// `E e(xi)`.
    base: f64,
}

impl ExcessErrorOracle {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        let base = match spec.error {
            ErrorFn::Square => 0.5 * spec.noise.variance(),
            ErrorFn::PPower(p) => {
                let m = spec.noise.abs_moment(p)?;
                if !m.is_finite() {
                    return invalid(format!("noise {} has no moment of order {p}", spec.noise.label()));
                }
                spec.error.normalizer() * m
            }
        };
        Ok(Self {
            spec,
            rule: GaussLegendre::new(64),
            base,
        })
    }

    /// Oracle for Gaussian noise of variance `sigma2`, the setting of the
    /// exact minimax risk.
    pub fn gaussian_noise(input: crate::distributions::InputDist, error: ErrorFn, sigma2: f64) -> Result<Self> {
        let d = input.dim();
        Self::new(ProblemSpec::new(input, vec![0.0; d], NoiseModel::gaussian(sigma2)?, error)?)
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    /// `E e(xi)`, the error at the optimum.
    pub fn optimal_error(&self) -> f64 {
        self.base
    }

    /// Excess error of `w`.
    pub fn excess(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.spec.dim() {
            return invalid("w must match the dimension of the problem");
        }
        let delta: Vec<f64> = w.iter().zip(&self.spec.w_star).map(|(a, b)| a - b).collect();
        self.excess_of_offset(&delta)
    }

    /// Excess error at `w* + delta`.
    pub fn excess_of_offset(&self, delta: &[f64]) -> Result<f64> {
        if delta.iter().any(|x| !x.is_finite()) {
            return Ok(f64::INFINITY);
        }
        let input = &self.spec.input;
        match self.spec.error {
            ErrorFn::Square => Ok(0.5 * input.covariance().quad_form(delta).max(0.0)),
            ErrorFn::PPower(p) => {
                let mut total = 0.0;
                for c in input.projection(delta) {
                    total += c.weight * self.spec.noise.shifted_abs_moment(c.center, c.scale, p, &self.rule)?;
                }
                Ok((self.spec.error.normalizer() * total - self.base).max(0.0))
            }
        }
    }
}

/// Excess error of `w` under `oracle`.
pub fn excess_error(oracle: &ExcessErrorOracle, w: &[f64]) -> Result<f64> {
    oracle.excess(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::InputDist;
    use crate::numerics::{GaussHermite, RngStream};

    #[test]
    fn square_closed_form() {
        let spec = ProblemSpec::new(
            InputDist::standard_gaussian(2).unwrap(),
            vec![1.0, 2.0],
            NoiseModel::student_t(3.0, 1.0).unwrap(),
            ErrorFn::Square,
        )
        .unwrap();
        let o = ExcessErrorOracle::new(spec).unwrap();
        assert_eq!(o.excess(&[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(o.excess(&[2.0, 2.0]).unwrap(), 0.5);
    }

    #[test]
    fn quartic_constant_input_matches_polynomial() {
        // E(delta + eta)^4 = delta^4 + 6 delta^2 + 3 at sigma = 1
        let o = ExcessErrorOracle::gaussian_noise(InputDist::constant_one(), ErrorFn::p_power(4.0).unwrap(), 1.0).unwrap();
        for delta in [0.0_f64, 0.1, -0.7, 3.0] {
            let want = (delta.powi(4) + 6.0 * delta * delta) / 12.0;
            assert!((o.excess(&[delta]).unwrap() - want).abs() < 1e-13, "{delta}");
        }
    }

    #[test]
    fn p_power_matches_two_dimensional_quadrature() {
        // Gaussian input in d = 1: integrate over (x, eta) on a product grid
        // split at the kink of |t|^p with a fine Gauss-Legendre rule
        let p = 3.0;
        let err = ErrorFn::p_power(p).unwrap();
        let sigma2 = 1.0;
        let o = ExcessErrorOracle::gaussian_noise(InputDist::standard_gaussian(1).unwrap(), err, sigma2).unwrap();
        let gh = GaussHermite::new(60).unwrap();
        let gl = GaussLegendre::new(200);
        let inner = |c: f64| {
            // E|c + eta|^p by Legendre on each side of -c
            let dens = |e: f64| (-0.5 * e * e).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let f = |e: f64| (c + e).abs().powf(p) * dens(e);
            gl.integrate(-12.0, -c, f) + gl.integrate(-c, 12.0, f)
        };
        let base = inner(0.0);
        for delta in [0.1, 0.6] {
            let two_d = gh.expectation(1.0, |x| inner(delta * x)) - base;
            let want = two_d * err.normalizer();
            assert!((o.excess(&[delta]).unwrap() - want).abs() < 1e-6, "{delta}");
        }
    }

    #[test]
    fn nonnegative_and_zero_at_optimum() {
        let spec = ProblemSpec::new(
            InputDist::coord_kurtosis(3, 5.0).unwrap(),
            vec![0.5, -1.0, 2.0],
            NoiseModel::two_point(1.5, 0.4).unwrap(),
            ErrorFn::p_power(3.5).unwrap(),
        )
        .unwrap();
        let o = ExcessErrorOracle::new(spec.clone()).unwrap();
        assert!(o.excess(&spec.w_star).unwrap().abs() < 1e-10);
        let mut rng = RngStream::new(9, 0);
        let mut w = vec![0.0; 3];
        for _ in 0..200 {
            rng.fill_normal(&mut w);
            // convex with its minimum at w*: nondecreasing along rays from w*
            let along = |t: f64| {
                let v: Vec<f64> = w.iter().zip(&spec.w_star).map(|(a, b)| b + t * a).collect();
                o.excess(&v).unwrap()
            };
            assert!(along(0.5) > 0.0 && along(0.5) < along(1.0));
        }
    }

    #[test]
    fn heavy_noise_without_the_moment_is_rejected() {
        let spec = ProblemSpec::new(
            InputDist::standard_gaussian(1).unwrap(),
            vec![0.0],
            NoiseModel::student_t(3.0, 1.0).unwrap(),
            ErrorFn::p_power(4.0).unwrap(),
        )
        .unwrap();
        assert!(ExcessErrorOracle::new(spec).is_err());
    }
}
