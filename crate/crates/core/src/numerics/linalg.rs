//! Dense symmetric linear algebra for small dimensions (d <= 64).

use crate::error::{invalid, Error, Result};

/// Symmetric matrix stored densely in row-major order. Both triangles are
/// stored and kept bitwise equal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return invalid("matrix dimension must be positive");
        }
        if data.len() != dim * dim {
            return invalid(format!("expected {} entries, got {}", dim * dim, data.len()));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite entry at ({}, {})", pos / dim, pos % dim));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if data[i * dim + j] != data[j * dim + i] {
                    return invalid(format!("matrix not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix from its upper triangle `f(i, j)` with `i <= j`.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        Self { dim, data }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_upper_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self::from_upper_fn(diag.len(), |i, j| if i == j { diag[i] } else { 0.0 })
    }

    /// `scale * sum_i x_i x_i^T` over the rows of `xs` (n rows of length `dim`).
    pub fn gram(xs: &[f64], dim: usize, scale: f64) -> Self {
        let mut upper = vec![0.0; dim * dim];
        for x in xs.chunks_exact(dim) {
            for i in 0..dim {
                let xi = x[i];
                if xi == 0.0 {
                    continue;
                }
                let row = &mut upper[i * dim..(i + 1) * dim];
                for j in i..dim {
                    row[j] += xi * x[j];
                }
            }
        }
        Self::from_upper_fn(dim, |i, j| upper[i * dim + j] * scale)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        (0..self.dim).map(|i| x[i] * dot(self.row(i), x)).sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_upper_fn(self.dim, |i, j| c * self.get(i, j))
    }

    /// Symmetric product `self * other` when the two commute up to rounding,
    /// e.g. `A^2`. The upper triangle of the product is mirrored.
    pub fn sym_product(&self, other: &SymMatrix) -> SymMatrix {
        let d = self.dim;
        Self::from_upper_fn(d, |i, j| (0..d).map(|l| self.get(i, l) * other.get(l, j)).sum())
    }

    /// Congruence `w * self * w` for symmetric `w`.
    pub fn congruence(&self, w: &SymMatrix) -> SymMatrix {
        let d = self.dim;
        let mut aw = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                aw[i * d + j] = (0..d).map(|l| self.get(i, l) * w.get(l, j)).sum();
            }
        }
        Self::from_upper_fn(d, |i, j| (0..d).map(|l| w.get(i, l) * aw[l * d + j]).sum())
    }

    /// `self^{-1/2}` via the eigendecomposition.
    pub fn inverse_sqrt(&self) -> Result<SymMatrix> {
        let spec = sym_eigen(self);
        let lmax = spec.max().abs().max(f64::MIN_POSITIVE);
        if spec.min() <= 1e-12 * lmax {
            return Err(Error::NotPositiveDefinite {
                pivot: 0,
                value: spec.min(),
            });
        }
        let inv: Vec<f64> = spec.values.iter().map(|l| 1.0 / l.sqrt()).collect();
        Ok(spec.compose(&inv))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Row-major `d x d`; column `j` is the eigenvector of `values[j]`.
    pub vectors: Vec<f64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|i| self.vectors[i * d + j]).collect()
    }

    /// `Q diag(f) Q^T`.
    pub fn compose(&self, f: &[f64]) -> SymMatrix {
        let d = self.dim();
        let q = &self.vectors;
        SymMatrix::from_upper_fn(d, |i, j| (0..d).map(|l| q[i * d + l] * f[l] * q[j * d + l]).sum())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.compose(&self.values)
    }

    /// Numerically rank deficient: `lambda_min <= 1e-10 * lambda_max`, or zero.
    pub fn is_rank_deficient(&self) -> bool {
        let max = self.max();
        max <= 0.0 || self.min() <= SINGULAR_RTOL * max
    }
}

/// Relative eigenvalue threshold below which a sample covariance is singular.
pub const SINGULAR_RTOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver. Iterates until the off-diagonal Frobenius norm
/// is at most `1e-12 * ||A||_F`.
pub fn sym_eigen(a: &SymMatrix) -> Spectrum {
    let d = a.dim();
    let mut m = a.data.clone();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let threshold = 1e-12 * a.frobenius();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * d + j] * m[i * d + j])
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * d + p];
                let aqq = m[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- J^T A J on rows/columns p and q
                for k in 0..d {
                    let akp = m[k * d + p];
                    let akq = m[k * d + q];
                    m[k * d + p] = c * akp - s * akq;
                    m[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = m[p * d + k];
                    let aqk = m[q * d + k];
                    m[p * d + k] = c * apk - s * aqk;
                    m[q * d + k] = s * apk + c * aqk;
                }
                m[p * d + q] = 0.0;
                m[q * d + p] = 0.0;
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[i * d + i].total_cmp(&m[j * d + j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[i * d + i]).collect();
    let mut vectors = vec![0.0; d * d];
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..d {
            vectors[i * d + new_j] = v[i * d + old_j];
        }
    }
    Spectrum { values, vectors }
}

/// Lower-triangular factor, row-major.
#[derive(Debug, Clone)]
pub struct LowerTriangular {
    dim: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.data[i * self.dim + j]
        }
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut x = b.to_vec();
        for i in 0..d {
            let mut s = x[i];
            for j in 0..i {
                s -= self.data[i * d + j] * x[j];
            }
            x[i] = s / self.data[i * d + i];
        }
        x
    }

    /// Solves `L^T x = b`.
    pub fn solve_upper_transposed(&self, b: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut x = b.to_vec();
        for i in (0..d).rev() {
            let mut s = x[i];
            for j in (i + 1)..d {
                s -= self.data[j * d + i] * x[j];
            }
            x[i] = s / self.data[i * d + i];
        }
        x
    }

    /// Solves `L L^T x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper_transposed(&self.solve_lower(b))
    }

    /// `L L^T`.
    pub fn reconstruct(&self) -> SymMatrix {
        let d = self.dim;
        SymMatrix::from_upper_fn(d, |i, j| (0..=i.min(j)).map(|l| self.get(i, l) * self.get(j, l)).sum())
    }
}

/// Cholesky factorisation `A = L L^T`.
pub fn cholesky(a: &SymMatrix) -> Result<LowerTriangular> {
    let d = a.dim();
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let mut diag = a.get(j, j);
        for k in 0..j {
            diag -= l[j * d + k] * l[j * d + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: diag });
        }
        let ljj = diag.sqrt();
        l[j * d + j] = ljj;
        for i in (j + 1)..d {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = s / ljj;
        }
    }
    Ok(LowerTriangular { dim: d, data: l })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn random_spd(rng: &mut RngStream, d: usize) -> SymMatrix {
        let mut xs = vec![0.0; 2 * d * d];
        rng.fill_normal(&mut xs);
        let g = SymMatrix::gram(&xs, d, 1.0 / (2 * d) as f64);
        SymMatrix::from_upper_fn(d, |i, j| g.get(i, j) + if i == j { 0.1 } else { 0.0 })
    }

    fn random_sym(rng: &mut RngStream, d: usize) -> SymMatrix {
        SymMatrix::from_upper_fn(d, |_, _| rng.normal())
    }

    #[test]
    fn rejects_nonfinite_and_asymmetric() {
        assert!(SymMatrix::new(2, vec![1.0, f64::NAN, f64::NAN, 1.0]).is_err());
        assert!(SymMatrix::new(2, vec![1.0, 2.0, 3.0, 1.0]).is_err());
        assert!(SymMatrix::new(2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn identity_spectrum() {
        let s = sym_eigen(&SymMatrix::identity(3));
        assert_eq!(s.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_spectrum_is_axis_aligned() {
        let s = sym_eigen(&SymMatrix::diagonal(&[5.0, 2.0]));
        assert_eq!(s.values, vec![2.0, 5.0]);
        assert_eq!(s.vector(0), vec![0.0, 1.0]);
        assert_eq!(s.vector(1), vec![1.0, 0.0]);
    }

    #[test]
    fn two_by_two_spectrum() {
        let a = SymMatrix::new(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let s = sym_eigen(&a);
        assert!((s.values[0] - 1.0).abs() < 1e-14);
        assert!((s.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let mut rng = RngStream::new(11, 0);
        for d in [1, 2, 3, 5, 8, 16, 32] {
            let a = random_sym(&mut rng, d);
            let s = sym_eigen(&a);
            let r = s.reconstruct();
            let scale = a.max_abs().max(1.0);
            for i in 0..d {
                for j in 0..d {
                    assert!((r.get(i, j) - a.get(i, j)).abs() <= 1e-10 * scale);
                    let qtq: f64 = (0..d).map(|l| s.vectors[l * d + i] * s.vectors[l * d + j]).sum();
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((qtq - e).abs() < 1e-10);
                }
            }
            let tr: f64 = s.values.iter().sum();
            assert!((tr - a.trace()).abs() <= 1e-9 * a.trace().abs().max(1.0));
            assert!(s.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn determinant_matches_two_by_two_closed_form() {
        let mut rng = RngStream::new(12, 0);
        for _ in 0..100 {
            let a = random_sym(&mut rng, 2);
            let s = sym_eigen(&a);
            let det = a.get(0, 0) * a.get(1, 1) - a.get(0, 1) * a.get(1, 0);
            assert!((s.values[0] * s.values[1] - det).abs() <= 1e-10 * (1.0 + det.abs()));
        }
    }

    #[test]
    fn eigen_is_deterministic() {
        let mut rng = RngStream::new(13, 0);
        let a = random_sym(&mut rng, 6);
        let (s1, s2) = (sym_eigen(&a), sym_eigen(&a));
        assert_eq!(s1.values, s2.values);
        assert_eq!(s1.vectors, s2.vectors);
    }

    #[test]
    fn cholesky_examples() {
        let l = cholesky(&SymMatrix::identity(3)).unwrap();
        assert_eq!(l.reconstruct(), SymMatrix::identity(3));
        let l = cholesky(&SymMatrix::diagonal(&[4.0, 9.0])).unwrap();
        assert_eq!((l.get(0, 0), l.get(1, 0), l.get(1, 1)), (2.0, 0.0, 3.0));
        let l = cholesky(&SymMatrix::new(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap()).unwrap();
        assert!((l.get(0, 0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((l.get(1, 0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((l.get(1, 1) - 1.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = SymMatrix::new(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(cholesky(&a), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
        assert!(cholesky(&SymMatrix::zeros(2)).is_err());
    }

    #[test]
    fn cholesky_reconstructs_random_spd() {
        let mut rng = RngStream::new(14, 0);
        for t in 0..500 {
            let d = 1 + t % 16;
            let a = random_spd(&mut rng, d);
            let r = cholesky(&a).unwrap().reconstruct();
            let scale = a.max_abs();
            for (x, y) in r.as_slice().iter().zip(a.as_slice()) {
                assert!((x - y).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn triangular_solves() {
        let mut rng = RngStream::new(15, 0);
        let a = random_spd(&mut rng, 5);
        let b: Vec<f64> = (0..5).map(|i| i as f64 - 2.0).collect();
        let x = cholesky(&a).unwrap().solve(&b);
        let ax = a.matvec(&x);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn inverse_sqrt_whitens() {
        let mut rng = RngStream::new(16, 0);
        let a = random_spd(&mut rng, 4);
        let w = a.inverse_sqrt().unwrap();
        let i = a.congruence(&w);
        for r in 0..4 {
            for c in 0..4 {
                let e = if r == c { 1.0 } else { 0.0 };
                assert!((i.get(r, c) - e).abs() < 1e-10);
            }
        }
    }
}
