use crate::distributions::Dataset;
use crate::numerics::{cholesky, sym_eigen, SymMatrix};

/// Output of a fitting procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub w_hat: Vec<f64>,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub grad_norm_final: f64,
    pub objective_trace: Option<Vec<f64>>,
    /// The sample covariance was numerically singular.
    pub singular: bool,
}

/// `Sigma_n = X^T X / n` and `X^T y / n`.
pub(crate) fn normal_equations(data: &Dataset) -> (SymMatrix, Vec<f64>) {
    let d = data.dim();
    let n = data.n() as f64;
    let gram = SymMatrix::gram(data.x(), d, 1.0 / n);
    let mut rhs = vec![0.0; d];
    for (i, y) in data.y().iter().enumerate() {
        for (r, x) in rhs.iter_mut().zip(data.row(i)) {
            *r += x * y / n;
        }
    }
    (gram, rhs)
}

/// Least squares. Nonsingular designs are solved by Cholesky; singular ones
/// get the minimum-norm solution and are flagged.
pub fn ols_fit(data: &Dataset) -> FitResult {
    let (gram, rhs) = normal_equations(data);
    let spec = sym_eigen(&gram);
    let singular = spec.is_rank_deficient();
    let w_hat = match (singular, cholesky(&gram)) {
        (false, Ok(chol)) => chol.solve(&rhs),
        _ => {
            let d = data.dim();
            let cutoff = crate::numerics::SINGULAR_RTOL * spec.max();
            let mut w = vec![0.0; d];
            for (j, &lambda) in spec.values.iter().enumerate() {
                if lambda > cutoff && lambda > 0.0 {
                    let q = spec.vector(j);
                    let c = q.iter().zip(&rhs).map(|(a, b)| a * b).sum::<f64>() / lambda;
                    w.iter_mut().zip(&q).for_each(|(wi, qi)| *wi += c * qi);
                }
            }
            w
        }
    };
    let grad = gram.matvec(&w_hat);
    let grad_norm_final = grad.iter().zip(&rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    FitResult {
        w_hat,
        iterations: 1,
        inner_iterations: 0,
        grad_norm_final,
        objective_trace: None,
        singular: singular || spec.max() <= 0.0,
    }
}

/// Arithmetic mean of `n` rows of length `d`.
pub fn sample_mean(samples: &[f64], d: usize) -> crate::Result<Vec<f64>> {
    if d == 0 || samples.is_empty() || !samples.len().is_multiple_of(d) {
        return crate::error::invalid("samples must form a nonempty n x d array");
    }
    let n = samples.len() / d;
    let mut mean = vec![0.0; d];
    for row in samples.chunks_exact(d) {
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    #[test]
    fn ols_examples() {
        let data = Dataset::new(vec![1.0, 0.0, 0.0, 1.0], vec![3.0, 5.0], 2).unwrap();
        let fit = ols_fit(&data);
        assert!(!fit.singular);
        assert!((fit.w_hat[0] - 3.0).abs() < 1e-12 && (fit.w_hat[1] - 5.0).abs() < 1e-12);
        let data = Dataset::new(vec![1.0; 4], vec![1.0, 2.0, 4.0, 5.0], 1).unwrap();
        assert!((ols_fit(&data).w_hat[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn noiseless_recovery_and_normal_equations() {
        let mut rng = RngStream::new(12, 0);
        let w_star = [0.5, -2.0, 1.25];
        for _ in 0..50 {
            let n = 3 + (rng.uniform_open() * 40.0) as usize;
            let mut x = vec![0.0; n * 3];
            rng.fill_normal(&mut x);
            let y: Vec<f64> = x.chunks_exact(3).map(|r| r.iter().zip(&w_star).map(|(a, b)| a * b).sum()).collect();
            let fit = ols_fit(&Dataset::new(x.clone(), y, 3).unwrap());
            for (a, b) in fit.w_hat.iter().zip(&w_star) {
                assert!((a - b).abs() < 1e-9);
            }
            let mut noisy_y = vec![0.0; n];
            rng.fill_normal(&mut noisy_y);
            let data = Dataset::new(x, noisy_y, 3).unwrap();
            assert!(ols_fit(&data).grad_norm_final <= 1e-9);
        }
    }

    #[test]
    fn singular_design_is_flagged_with_min_norm_solution() {
        // both rows along e1: the e2 component is unidentified
        let data = Dataset::new(vec![1.0, 0.0, 2.0, 0.0], vec![1.0, 2.0], 2).unwrap();
        let fit = ols_fit(&data);
        assert!(fit.singular);
        assert!((fit.w_hat[0] - 1.0).abs() < 1e-12 && fit.w_hat[1] == 0.0);
        let zeros = Dataset::new(vec![0.0; 3], vec![1.0, 2.0, 3.0], 1).unwrap();
        let fit = ols_fit(&zeros);
        assert!(fit.singular);
        assert_eq!(fit.w_hat, vec![0.0]);
    }

    #[test]
    fn sample_mean_examples() {
        assert_eq!(sample_mean(&[2.0, 3.0, 2.0, 3.0], 2).unwrap(), vec![2.0, 3.0]);
        assert_eq!(sample_mean(&[0.0, 2.0], 1).unwrap(), vec![1.0]);
        assert_eq!(sample_mean(&[1.5, -2.0, -1.5, 2.0], 2).unwrap(), vec![0.0, 0.0]);
        assert!(sample_mean(&[1.0, 2.0, 3.0], 2).is_err());
    }
}
