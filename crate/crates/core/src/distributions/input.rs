use crate::error::{invalid, Error, Result};
use crate::numerics::linalg::dot;
use crate::numerics::{cholesky, sym_eigen, LowerTriangular, RngStream, SymMatrix};

/// Law of the input vector `X`.
#[derive(Debug, Clone)]
pub enum InputKind {
    /// `N(0, sigma)`.
    Gaussian { sigma: SymMatrix },
    /// Finitely supported law: `P(X = points[j]) = probs[j]`.
    Discrete { points: Vec<Vec<f64>>, probs: Vec<f64> },
    /// Independent coordinates. The first is 0 with probability `1 - 1/kappa1`
    /// and `+-sqrt(kappa1)` otherwise, giving unit variance and kurtosis
    /// `kappa1`; the others are standard normal.
    CoordKurtosis { dim: usize, kappa1: f64 },
}

#[derive(Debug, Clone)]
enum Sampler {
    Gaussian(LowerTriangular),
    Discrete(Vec<f64>),
    CoordKurtosis,
}

/// An input law together with its second-moment matrix `Sigma = E[X X^T]`.
#[derive(Debug, Clone)]
pub struct InputDist {
    kind: InputKind,
    cov: SymMatrix,
    sampler: Sampler,
}

/// One component of the law of `<delta, X>`: with probability `weight`, a
/// normal with mean `center` and standard deviation `scale` (a point mass when
/// `scale == 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionComponent {
    pub weight: f64,
    pub center: f64,
    pub scale: f64,
}

impl InputDist {
    pub fn gaussian(sigma: SymMatrix) -> Result<Self> {
        let chol = cholesky(&sigma)?;
        Ok(Self {
            cov: sigma.clone(),
            kind: InputKind::Gaussian { sigma },
            sampler: Sampler::Gaussian(chol),
        })
    }

    pub fn standard_gaussian(dim: usize) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        Self::gaussian(SymMatrix::identity(dim))
    }

    pub fn discrete(points: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != probs.len() {
            return invalid("discrete law needs one probability per support point");
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return invalid("support points must share a positive dimension");
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return invalid("support points must be finite");
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return invalid("probabilities must be nonnegative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("probabilities sum to {total}, not 1"));
        }
        let cov = SymMatrix::from_upper_fn(dim, |i, j| {
            points.iter().zip(&probs).map(|(x, p)| p * x[i] * x[j]).sum()
        });
        let spec = sym_eigen(&cov);
        if spec.max() <= 0.0 || spec.min() <= 1e-12 * spec.max() {
            return Err(Error::NotFullRank(
                "support of the discrete law lies in a hyperplane".into(),
            ));
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        Ok(Self {
            kind: InputKind::Discrete { points, probs },
            cov,
            sampler: Sampler::Discrete(cumulative),
        })
    }

    /// Uniform law on `{+-sqrt(d) e_j}`, which has identity covariance.
    pub fn axis_uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        let r = (dim as f64).sqrt();
        let mut points = Vec::with_capacity(2 * dim);
        for j in 0..dim {
            for sign in [1.0, -1.0] {
                let mut x = vec![0.0; dim];
                x[j] = sign * r;
                points.push(x);
            }
        }
        Self::discrete(points, vec![1.0 / (2 * dim) as f64; 2 * dim])
    }

    /// The deterministic input `X = 1` in one dimension.
    pub fn constant_one() -> Self {
        Self::discrete(vec![vec![1.0]], vec![1.0]).expect("valid point mass")
    }

    /// `X in {0, 1}` with `P(X = 0) = rho`, in one dimension.
    pub fn bernoulli(rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return invalid(format!("rho must lie in [0, 1), got {rho}"));
        }
        Self::discrete(vec![vec![0.0], vec![1.0]], vec![rho, 1.0 - rho])
    }

    pub fn coord_kurtosis(dim: usize, kappa1: f64) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        if !(kappa1 >= 1.0) || !kappa1.is_finite() {
            return invalid(format!("kurtosis must be finite and >= 1, got {kappa1}"));
        }
        Ok(Self {
            kind: InputKind::CoordKurtosis { dim, kappa1 },
            cov: SymMatrix::identity(dim),
            sampler: Sampler::CoordKurtosis,
        })
    }

    pub fn kind(&self) -> &InputKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    /// `Sigma = E[X X^T]`.
    pub fn covariance(&self) -> &SymMatrix {
        &self.cov
    }

    pub fn label(&self) -> String {
        match &self.kind {
            InputKind::Gaussian { .. } => format!("gaussian(d={})", self.dim()),
            InputKind::Discrete { points, .. } => format!("discrete(d={}, m={})", self.dim(), points.len()),
            InputKind::CoordKurtosis { dim, kappa1 } => format!("coord-kurtosis(d={dim}, kappa={kappa1})"),
        }
    }

    /// Draws one input into `out`.
    pub fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]) {
        match (&self.sampler, &self.kind) {
            (Sampler::Gaussian(chol), _) => {
                let d = out.len();
                let mut g = vec![0.0; d];
                rng.fill_normal(&mut g);
                for i in 0..d {
                    out[i] = (0..=i).map(|j| chol.get(i, j) * g[j]).sum();
                }
            }
            (Sampler::Discrete(cumulative), InputKind::Discrete { points, .. }) => {
                let u = rng.uniform_open();
                let j = cumulative.partition_point(|c| *c < u).min(points.len() - 1);
                out.copy_from_slice(&points[j]);
            }
            (Sampler::CoordKurtosis, InputKind::CoordKurtosis { kappa1, .. }) => {
                let q = 1.0 / kappa1;
                let u = rng.uniform_open();
                out[0] = if u < 0.5 * q {
                    kappa1.sqrt()
                } else if u < q {
                    -kappa1.sqrt()
                } else {
                    0.0
                };
                rng.fill_normal(&mut out[1..]);
            }
            _ => unreachable!("sampler matches kind by construction"),
        }
    }

    /// `n` inputs as a row-major `n x d` array.
    pub fn sample_inputs(&self, n: usize, rng: &mut RngStream) -> Vec<f64> {
        let d = self.dim();
        let mut xs = vec![0.0; n * d];
        for row in xs.chunks_exact_mut(d) {
            self.sample_into(rng, row);
        }
        xs
    }

    /// Law of `<delta, X>` as a finite mixture of normals and atoms.
    pub fn projection(&self, delta: &[f64]) -> Vec<ProjectionComponent> {
        match &self.kind {
            InputKind::Gaussian { sigma } => vec![ProjectionComponent {
                weight: 1.0,
                center: 0.0,
                scale: sigma.quad_form(delta).max(0.0).sqrt(),
            }],
            InputKind::Discrete { points, probs } => points
                .iter()
                .zip(probs)
                .filter(|(_, p)| **p > 0.0)
                .map(|(x, p)| ProjectionComponent {
                    weight: *p,
                    center: dot(x, delta),
                    scale: 0.0,
                })
                .collect(),
            InputKind::CoordKurtosis { kappa1, .. } => {
                let scale = delta[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                let q = 1.0 / kappa1;
                let jump = delta[0] * kappa1.sqrt();
                let mut comps = vec![
                    ProjectionComponent { weight: 0.5 * q, center: jump, scale },
                    ProjectionComponent { weight: 0.5 * q, center: -jump, scale },
                ];
                if q < 1.0 {
                    comps.push(ProjectionComponent { weight: 1.0 - q, center: 0.0, scale });
                }
                comps
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_validation() {
        assert!(InputDist::discrete(vec![vec![1.0, 0.0]], vec![1.0]).is_err());
        assert!(matches!(
            InputDist::discrete(vec![vec![1.0, 1.0], vec![-1.0, -1.0]], vec![0.5, 0.5]),
            Err(Error::NotFullRank(_))
        ));
        assert!(InputDist::discrete(vec![vec![1.0]], vec![0.9]).is_err());
        assert!(InputDist::bernoulli(1.0).is_err());
        let cov = InputDist::axis_uniform(3).unwrap().covariance().clone();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((cov.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn coord_kurtosis_moments() {
        let input = InputDist::coord_kurtosis(3, 20.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        let m = 400_000;
        let xs = input.sample_inputs(m, &mut rng);
        let (mut m2, mut m4) = (0.0, 0.0);
        for x in xs.chunks_exact(3) {
            m2 += x[0] * x[0];
            m4 += x[0].powi(4);
        }
        m2 /= m as f64;
        m4 /= m as f64;
        // se of m2 is sqrt((kappa - 1) / m) ~ 0.007; of m4 ~ 20 sqrt(19 / m) ~ 0.14
        assert!((m2 - 1.0).abs() < 0.035);
        assert!((m4 - 20.0).abs() < 0.7);
    }

    #[test]
    fn projection_weights_sum_to_one() {
        let delta = [0.3, -1.0, 2.0];
        for input in [
            InputDist::standard_gaussian(3).unwrap(),
            InputDist::axis_uniform(3).unwrap(),
            InputDist::coord_kurtosis(3, 5.0).unwrap(),
            InputDist::coord_kurtosis(3, 1.0).unwrap(),
        ] {
            let comps = input.projection(&delta);
            let w: f64 = comps.iter().map(|c| c.weight).sum();
            assert!((w - 1.0).abs() < 1e-14);
            let var: f64 = comps.iter().map(|c| c.weight * (c.center * c.center + c.scale * c.scale)).sum();
            assert!((var - input.covariance().quad_form(&delta)).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_sampler_has_requested_covariance() {
        let sigma = SymMatrix::new(2, vec![2.0, 0.6, 0.6, 1.0]).unwrap();
        let input = InputDist::gaussian(sigma.clone()).unwrap();
        let mut rng = RngStream::new(2, 0);
        let m = 200_000;
        let xs = input.sample_inputs(m, &mut rng);
        let emp = SymMatrix::gram(&xs, 2, 1.0 / m as f64);
        for i in 0..2 {
            for j in 0..2 {
                // entry se <= sqrt(2 * 2 * 2 / m) ~ 0.0063
                assert!((emp.get(i, j) - sigma.get(i, j)).abs() < 0.032);
            }
        }
    }
}
