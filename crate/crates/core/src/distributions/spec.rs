use super::input::InputDist;
use super::noise::NoiseModel;
use crate::error::{invalid, Result};
use crate::estimators::ErrorFn;
use crate::numerics::linalg::dot;
use crate::numerics::{std_normal_abs_moment, RngStream};

/// A linear model `Y = <w*, X> + xi` together with the error used to score it.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub input: InputDist,
    pub w_star: Vec<f64>,
    pub noise: NoiseModel,
    pub error: ErrorFn,
}

impl ProblemSpec {
    pub fn new(input: InputDist, w_star: Vec<f64>, noise: NoiseModel, error: ErrorFn) -> Result<Self> {
        if w_star.len() != input.dim() {
            return invalid(format!("w* has length {}, inputs have dimension {}", w_star.len(), input.dim()));
        }
        if w_star.iter().any(|v| !v.is_finite()) {
            return invalid("w* must be finite");
        }
        Ok(Self { input, w_star, noise, error })
    }

    pub fn dim(&self) -> usize {
        self.input.dim()
    }
}

/// `n` samples stored row-major: `x` is `n x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || y.is_empty() || x.len() != y.len() * d {
            return invalid(format!("{} inputs do not match {} responses in dimension {d}", x.len(), y.len()));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return invalid("dataset entries must be finite");
        }
        Ok(Self { d, x, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// Residuals `<w, x_i> - y_i`, written into `out`.
    pub fn residuals_into(&self, w: &[f64], out: &mut [f64]) {
        for ((r, x), y) in out.iter_mut().zip(self.x.chunks_exact(self.d)).zip(&self.y) {
            *r = dot(w, x) - y;
        }
    }
}

/// Draws all `n` inputs first, then the `n` noise values.
pub fn sample_dataset(spec: &ProblemSpec, n: usize, rng: &mut RngStream) -> Result<Dataset> {
    if n == 0 {
        return invalid("sample size must be positive");
    }
    let d = spec.dim();
    let x = spec.input.sample_inputs(n, rng);
    let y = x
        .chunks_exact(d)
        .map(|xi| dot(&spec.w_star, xi) + spec.noise.sample(rng))
        .collect();
    Ok(Dataset { d, x, y })
}

/// Distribution classes defined by conditional noise moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistClass {
    /// Gaussian noise with variance `sigma2`.
    Gauss { sigma2: f64 },
    /// Conditional noise variance at most `sigma2`.
    P2 { sigma2: f64 },
    /// The p-th power moment condition with lower level `mu`.
    Pp { sigma2: f64, mu: f64, p: f64 },
}

/// `r(p) = m(2p - 2) / m(p - 2) * sigma^p`.
pub fn moment_ratio_bound(p: f64, sigma2: f64) -> Result<f64> {
    Ok(std_normal_abs_moment(2.0 * p - 2.0)? / std_normal_abs_moment(p - 2.0)? * sigma2.sqrt().powf(p))
}

/// Largest legal `mu` for the p-th power class: `m(p) sigma^{p-2}`.
pub fn max_legal_mu(p: f64, sigma2: f64) -> Result<f64> {
    Ok(std_normal_abs_moment(p)? * sigma2.sqrt().powf(p - 2.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// Named slacks of each defining inequality; nonnegative when it holds.
    pub slacks: Vec<(String, f64)>,
}

/// Relative tolerance on slacks: closed-form moments tie at equality.
const SLACK_RTOL: f64 = 1e-12;

/// Checks the defining inequalities of `class`. The noise is independent of
/// the inputs, so conditional moments equal marginal ones.
pub fn class_membership_check(spec: &ProblemSpec, class: DistClass) -> Result<Membership> {
    let noise = &spec.noise;
    let mut slacks: Vec<(String, f64, f64)> = Vec::new();
    let mut structural = true;
    match class {
        DistClass::Gauss { sigma2 } => {
            structural = matches!(noise, NoiseModel::Gaussian { .. });
            slacks.push(("variance_gap".into(), -(sigma2 - noise.variance()).abs(), sigma2));
        }
        DistClass::P2 { sigma2 } => {
            slacks.push(("variance".into(), sigma2 - noise.variance(), sigma2));
        }
        DistClass::Pp { sigma2, mu, p } => {
            if !(p > 2.0) {
                return invalid(format!("p-th power class needs p > 2, got {p}"));
            }
            let mu_max = max_legal_mu(p, sigma2)?;
            if !(mu > 0.0 && mu <= mu_max * (1.0 + SLACK_RTOL)) {
                return invalid(format!("mu must lie in (0, {mu_max}], got {mu}"));
            }
            let low = noise.abs_moment(p - 2.0)?;
            let high = noise.abs_moment(2.0 * p - 2.0)?;
            let r = moment_ratio_bound(p, sigma2)?;
            let ratio = if low > 0.0 { high / low } else { f64::INFINITY };
            slacks.push(("moment_ratio".into(), r - ratio, r));
            slacks.push(("mu".into(), low - mu, mu));
        }
    }
    let member = structural && slacks.iter().all(|(_, s, scale)| *s >= -SLACK_RTOL * scale.abs().max(1.0));
    Ok(Membership {
        member,
        slacks: slacks.into_iter().map(|(name, s, _)| (name, s)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_with(noise: NoiseModel) -> ProblemSpec {
        ProblemSpec::new(InputDist::standard_gaussian(2).unwrap(), vec![1.0, -1.0], noise, ErrorFn::Square).unwrap()
    }

    #[test]
    fn noiseless_responses_are_exact() {
        let spec = spec_with(NoiseModel::gaussian(0.0).unwrap());
        let mut rng = RngStream::new(8, 0);
        let data = sample_dataset(&spec, 50, &mut rng).unwrap();
        for i in 0..50 {
            assert_eq!(data.y()[i], dot(&spec.w_star, data.row(i)));
        }
    }

    #[test]
    fn sampling_is_reproducible_and_centered() {
        let mut spec = spec_with(NoiseModel::gaussian(1.0).unwrap());
        spec.w_star = vec![0.0, 0.0];
        let a = sample_dataset(&spec, 10_000, &mut RngStream::new(9, 1)).unwrap();
        let b = sample_dataset(&spec, 10_000, &mut RngStream::new(9, 1)).unwrap();
        assert_eq!(a, b);
        let mean = a.y().iter().sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 4.0 / 100.0);
    }

    #[test]
    fn membership_examples() {
        let gauss = spec_with(NoiseModel::gaussian(1.0).unwrap());
        assert!(class_membership_check(&gauss, DistClass::Gauss { sigma2: 1.0 }).unwrap().member);
        assert!(!class_membership_check(&gauss, DistClass::Gauss { sigma2: 2.0 }).unwrap().member);
        assert!(class_membership_check(&gauss, DistClass::P2 { sigma2: 1.0 }).unwrap().member);
        for p in [3.0, 4.0, 5.5] {
            // Gaussian noise meets the ratio bound with equality
            let mu = std_normal_abs_moment(p - 2.0).unwrap();
            let m = class_membership_check(&gauss, DistClass::Pp { sigma2: 1.0, mu, p }).unwrap();
            assert!(m.member, "p={p}: {m:?}");
            assert!(m.slacks[0].1.abs() < 1e-12);
        }
        let t = spec_with(NoiseModel::student_t(3.0, 1.0).unwrap());
        let m = class_membership_check(&t, DistClass::P2 { sigma2: 1.0 }).unwrap();
        assert!(m.member);
        assert!(m.slacks[0].1.abs() < 1e-15);
        assert!(!class_membership_check(&t, DistClass::Gauss { sigma2: 1.0 }).unwrap().member);
        // infinite (2p - 2)-th moment fails the ratio bound
        let m = class_membership_check(&t, DistClass::Pp { sigma2: 1.0, mu: 0.1, p: 3.0 }).unwrap();
        assert!(!m.member);
        assert!(class_membership_check(&t, DistClass::Pp { sigma2: 1.0, mu: 10.0, p: 3.0 }).is_err());
    }

    #[test]
    fn ratio_bound_of_quartic() {
        // m(6) / m(2) = 15
        assert!((moment_ratio_bound(4.0, 1.0).unwrap() - 15.0).abs() < 1e-12);
    }
}
