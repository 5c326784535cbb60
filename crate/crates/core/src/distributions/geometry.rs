use std::f64::consts::PI;

use super::input::{InputDist, InputKind};
use crate::error::{invalid, Error, Result};
use crate::mc;
use crate::numerics::linalg::{dot, norm};
use crate::numerics::{shifted_normal_abs_moment, std_normal_abs_moment, sym_eigen, RngStream, SymMatrix};

/// Fourth-moment parameters of the whitened input `X~ = Sigma^{-1/2} X`:
/// `S = E[(X~ X~^T - I)^2]` and `R = sup_{|v| = 1} E[(<v, X~>^2 - 1)^2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixParams {
    pub s: SymMatrix,
    pub lambda_max_s: f64,
    pub r: f64,
}

impl MatrixParams {
    fn new(s: SymMatrix, r: f64) -> Self {
        let lambda_max_s = sym_eigen(&s).max();
        Self { s, lambda_max_s, r }
    }
}

/// Monte Carlo estimate of [`MatrixParams`] with entrywise standard errors.
#[derive(Debug, Clone)]
pub struct MatrixParamsEstimate {
    pub params: MatrixParams,
    pub s_se: SymMatrix,
    pub r_se: f64,
}

/// Exact parameters for Gaussian and discrete laws, closed form for the
/// kurtosis family. `R` for discrete laws is maximized over candidate
/// directions and is therefore a lower bound on the supremum.
pub fn matrix_params(input: &InputDist) -> Result<MatrixParams> {
    let d = input.dim();
    let params = match input.kind() {
        InputKind::Gaussian { .. } => MatrixParams::new(SymMatrix::identity(d).scaled((d + 1) as f64), 2.0),
        InputKind::CoordKurtosis { kappa1, .. } => {
            let diag: Vec<f64> = (0..d)
                .map(|j| if j == 0 { kappa1 } else { &3.0 } + d as f64 - 2.0)
                .collect();
            let r = if d == 1 { kappa1 - 1.0 } else { kappa1.max(3.0) - 1.0 };
            MatrixParams::new(SymMatrix::diagonal(&diag), r)
        }
        InputKind::Discrete { points, probs } => {
            let w = input.covariance().inverse_sqrt()?;
            let white: Vec<f64> = points.iter().flat_map(|x| w.matvec(x)).collect();
            cloud_params(&white, probs, d, true)
        }
    };
    debug_assert!(params.lambda_max_s <= params.r * d as f64 + 1e-9 * (1.0 + params.r));
    Ok(params)
}

fn cloud_params(white: &[f64], weights: &[f64], d: usize, point_starts: bool) -> MatrixParams {
    let mut s = vec![0.0; d * d];
    for (x, w) in white.chunks_exact(d).zip(weights) {
        let sq = dot(x, x);
        for i in 0..d {
            for j in 0..d {
                s[i * d + j] += w * sq * x[i] * x[j];
            }
        }
    }
    // E[(X X^T - I)^2] = E[|X|^2 X X^T] - 2 E[X X^T] + I
    let second = weighted_second_moment(white, weights, d);
    let s = SymMatrix::from_upper_fn(d, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        0.5 * (s[i * d + j] + s[j * d + i]) - 2.0 * second.get(i, j) + id
    });
    let mut starts = axis_starts(d);
    let spec = sym_eigen(&s);
    starts.extend((0..d).map(|j| spec.vector(j)));
    if point_starts {
        starts.extend(white.chunks_exact(d).take(256).map(<[f64]>::to_vec));
    }
    let (r, _) = sphere_max(d, &starts, |v| {
        let mut val = 0.0;
        let mut grad = vec![0.0; d];
        for (x, w) in white.chunks_exact(d).zip(weights) {
            let u = dot(v, x);
            let e = u * u - 1.0;
            val += w * e * e;
            let g = 4.0 * w * e * u;
            for (gi, xi) in grad.iter_mut().zip(x) {
                *gi += g * xi;
            }
        }
        (val, grad)
    });
    MatrixParams::new(s, r)
}

fn weighted_second_moment(xs: &[f64], weights: &[f64], d: usize) -> SymMatrix {
    SymMatrix::from_upper_fn(d, |i, j| xs.chunks_exact(d).zip(weights).map(|(x, w)| w * x[i] * x[j]).sum())
}

/// Monte Carlo route: whitens `samples` draws with the true `Sigma` and
/// averages. Used to cross-check the closed forms.
pub fn matrix_params_mc(input: &InputDist, samples: usize, rng: &mut RngStream) -> Result<MatrixParamsEstimate> {
    if samples < 2 {
        return invalid("need at least two Monte Carlo samples");
    }
    let d = input.dim();
    let w = input.covariance().inverse_sqrt()?;
    let raw = input.sample_inputs(samples, rng);
    let white: Vec<f64> = raw.chunks_exact(d).flat_map(|x| w.matvec(x)).collect();
    let weights = vec![1.0 / samples as f64; samples];
    let params = cloud_params(&white, &weights, d, false);
    let m = samples as f64;
    let mut sum2 = vec![0.0; d * d];
    for x in white.chunks_exact(d) {
        let sq = dot(x, x);
        for i in 0..d {
            for j in i..d {
                // entry (i, j) of (x x^T - I)^2 = |x|^2 x_i x_j - 2 x_i x_j + delta_ij
                let id = if i == j { 1.0 } else { 0.0 };
                let v = sq * x[i] * x[j] - 2.0 * x[i] * x[j] + id;
                sum2[i * d + j] += v * v;
            }
        }
    }
    let s_se = SymMatrix::from_upper_fn(d, |i, j| {
        let mean = params.s.get(i, j);
        ((sum2[i * d + j] / m - mean * mean).max(0.0) / (m - 1.0)).sqrt()
    });
    // the maximizing direction is re-found and its per-sample spread used
    let (_, v) = sphere_max(d, &axis_starts(d), |v| {
        let mut val = 0.0;
        let mut grad = vec![0.0; d];
        for x in white.chunks_exact(d) {
            let u = dot(v, x);
            let e = u * u - 1.0;
            val += e * e / m;
            for (gi, xi) in grad.iter_mut().zip(x) {
                *gi += 4.0 * e * u * xi / m;
            }
        }
        (val, grad)
    });
    let terms: Vec<f64> = white
        .chunks_exact(d)
        .map(|x| {
            let u = dot(&v, x);
            (u * u - 1.0).powi(2)
        })
        .collect();
    let mean = terms.iter().sum::<f64>() / m;
    let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(MatrixParamsEstimate {
        params,
        s_se,
        r_se: (var / m).sqrt(),
    })
}

fn axis_starts(d: usize) -> Vec<Vec<f64>> {
    let mut starts: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            e
        })
        .collect();
    let mut rng = RngStream::new(0x5e_edd1, 0);
    for _ in 0..8 {
        let mut v = vec![0.0; d];
        rng.fill_normal(&mut v);
        starts.push(v);
    }
    starts
}

/// Projected gradient ascent of `f` on the unit sphere from each start, with
/// step doubling on success and halving on failure. Returns the best value
/// and maximizer found.
pub(crate) fn sphere_max(
    d: usize,
    starts: &[Vec<f64>],
    f: impl Fn(&[f64]) -> (f64, Vec<f64>),
) -> (f64, Vec<f64>) {
    let mut best = (f64::NEG_INFINITY, vec![0.0; d]);
    for start in starts {
        let len = norm(start);
        if !(len > 0.0) {
            continue;
        }
        let mut v: Vec<f64> = start.iter().map(|x| x / len).collect();
        let (mut val, mut grad) = f(&v);
        let mut step = 1.0;
        for _ in 0..500 {
            let radial = dot(&grad, &v);
            let tangent: Vec<f64> = grad.iter().zip(&v).map(|(g, vi)| g - radial * vi).collect();
            let tn = norm(&tangent);
            if !(tn > 1e-13 * (1.0 + val.abs())) {
                break;
            }
            let mut trial: Vec<f64> = v.iter().zip(&tangent).map(|(vi, t)| vi + step * t / tn).collect();
            let trial_len = norm(&trial);
            trial.iter_mut().for_each(|x| *x /= trial_len);
            let (tv, tg) = f(&trial);
            if tv > val {
                v = trial;
                val = tv;
                grad = tg;
                step = (step * 2.0).min(1.0);
            } else {
                step *= 0.5;
                if step < 1e-10 {
                    break;
                }
            }
        }
        if val > best.0 {
            best = (val, v);
        }
    }
    best
}

/// `rho(P_X) = sup_{w != 0} P(<w, X> = 0)`.
///
/// Exact for discrete laws: every hyperplane through the origin is spanned by
/// `d - 1` support points, so all such subsets are enumerated.
pub fn hyperplane_mass(input: &InputDist) -> Result<f64> {
    let d = input.dim();
    match input.kind() {
        InputKind::Gaussian { .. } => Ok(0.0),
        InputKind::CoordKurtosis { kappa1, .. } => Ok(1.0 - 1.0 / kappa1),
        InputKind::Discrete { points, probs } => {
            let scale = points.iter().map(|x| norm(x)).fold(0.0, f64::max);
            let tol = 1e-10 * scale;
            let nonzero: Vec<usize> = (0..points.len()).filter(|&j| norm(&points[j]) > tol).collect();
            let zero_mass: f64 = (0..points.len()).filter(|j| !nonzero.contains(j)).map(|j| probs[j]).sum();
            if d == 1 {
                return Ok(zero_mass);
            }
            let subsets = binomial(nonzero.len(), d - 1);
            if subsets > 5e6 {
                return Err(Error::BudgetExceeded(format!(
                    "{subsets} hyperplanes to enumerate; support too large"
                )));
            }
            let mut best = zero_mass;
            let mut idx: Vec<usize> = (0..d - 1).collect();
            loop {
                let basis = orthonormal_basis(idx.iter().map(|&i| points[nonzero[i]].as_slice()), tol);
                let mass: f64 = nonzero
                    .iter()
                    .filter(|&&j| in_span(&points[j], &basis, tol))
                    .map(|&j| probs[j])
                    .sum::<f64>()
                    + zero_mass;
                best = best.max(mass);
                if !next_combination(&mut idx, nonzero.len()) {
                    break;
                }
            }
            Ok(best)
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    if k == 0 || k > n {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn orthonormal_basis<'a>(vectors: impl Iterator<Item = &'a [f64]>, tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut r = v.to_vec();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&r, b);
                r.iter_mut().zip(b).for_each(|(ri, bi)| *ri -= c * bi);
            }
        }
        let len = norm(&r);
        if len > tol {
            basis.push(r.into_iter().map(|x| x / len).collect());
        }
    }
    basis
}

fn in_span(x: &[f64], basis: &[Vec<f64>], tol: f64) -> bool {
    let mut r = x.to_vec();
    for b in basis {
        let c = dot(&r, b);
        r.iter_mut().zip(b).for_each(|(ri, bi)| *ri -= c * bi);
    }
    norm(&r) <= tol
}

/// `epsilon_n = P(rank(Sigma_n) < d)` with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularityEstimate {
    pub value: f64,
    pub low: f64,
    pub high: f64,
    pub exact: bool,
    pub reps: usize,
}

impl SingularityEstimate {
    fn exact(value: f64) -> Self {
        Self { value, low: value, high: value, exact: true, reps: 0 }
    }
}

pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let m = trials as f64;
    let p = successes as f64 / m;
    let z2 = z * z;
    let denom = 1.0 + z2 / m;
    let center = (p + z2 / (2.0 * m)) / denom;
    let half = z / denom * (p * (1.0 - p) / m + z2 / (4.0 * m * m)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Exact whenever a closed form exists (Gaussian, kurtosis family, and
/// one-dimensional discrete laws); Monte Carlo over `reps` designs otherwise.
pub fn singularity_prob(input: &InputDist, n: usize, reps: usize, rng: &RngStream) -> Result<SingularityEstimate> {
    if n == 0 {
        return invalid("sample size must be positive");
    }
    let d = input.dim();
    match input.kind() {
        InputKind::Gaussian { .. } => Ok(SingularityEstimate::exact(if n >= d { 0.0 } else { 1.0 })),
        InputKind::CoordKurtosis { kappa1, .. } => {
            // with n >= d the Gaussian block has full column rank a.s., so
            // the design is singular exactly when the first column vanishes
            let v = if n < d { 1.0 } else { (1.0 - 1.0 / kappa1).powi(n as i32) };
            Ok(SingularityEstimate::exact(v))
        }
        InputKind::Discrete { points, probs } if d == 1 => {
            let zero: f64 = points.iter().zip(probs).filter(|(x, _)| x[0] == 0.0).map(|(_, p)| p).sum();
            Ok(SingularityEstimate::exact(zero.powi(n as i32)))
        }
        InputKind::Discrete { .. } => {
            if reps == 0 {
                return invalid("Monte Carlo needs reps >= 1");
            }
            if n < d {
                return Ok(SingularityEstimate::exact(1.0));
            }
            let hits = mc::replicate(rng, reps, |_, r| {
                let xs = input.sample_inputs(n, r);
                sym_eigen(&SymMatrix::gram(&xs, d, 1.0 / n as f64)).is_rank_deficient()
            });
            let count = hits.iter().filter(|h| **h).count();
            let (low, high) = wilson_interval(count, reps, 1.96);
            Ok(SingularityEstimate { value: count as f64 / reps as f64, low, high, exact: false, reps })
        }
    }
}

/// Moments `E|<w, X>|^p` along a direction, by law.
fn directional_ratio(input: &InputDist, num_p: f64, den_p: f64) -> Result<f64> {
    // ratio(w) = E[|<w,X>|^num_p]^{1/num_p} / E[|<w,X>|^den_p]^{1/den_p}
    let d = input.dim();
    match input.kind() {
        InputKind::Gaussian { .. } => Ok(std_normal_abs_moment(num_p)?.powf(1.0 / num_p)
            / std_normal_abs_moment(den_p)?.powf(1.0 / den_p)),
        InputKind::CoordKurtosis { kappa1, .. } => {
            // w = (cos t, sin t * u): only the angle matters
            let q = 1.0 / kappa1;
            let jump = kappa1.sqrt();
            let moment = |t: f64, p: f64| -> Result<f64> {
                let (c, s) = (t.cos(), t.sin().abs());
                let tail = 0.5 * q * (shifted_normal_abs_moment(c * jump, s, p)? + shifted_normal_abs_moment(-c * jump, s, p)?);
                let center = if q < 1.0 { (1.0 - q) * shifted_normal_abs_moment(0.0, s, p)? } else { 0.0 };
                Ok(tail + center)
            };
            let ratio = |t: f64| -> Result<f64> { Ok(moment(t, num_p)?.powf(1.0 / num_p) / moment(t, den_p)?.powf(1.0 / den_p)) };
            if d == 1 {
                return ratio(0.0);
            }
            let grid = 2048;
            let mut best = (f64::NEG_INFINITY, 0.0);
            for i in 0..=grid {
                let t = 0.5 * PI * i as f64 / grid as f64;
                let v = ratio(t)?;
                if v > best.0 {
                    best = (v, t);
                }
            }
            // golden-section refinement around the best grid angle
            let h = 0.5 * PI / grid as f64;
            let (mut a, mut b) = ((best.1 - h).max(0.0), (best.1 + h).min(0.5 * PI));
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..60 {
                let (x1, x2) = (b - g * (b - a), a + g * (b - a));
                if ratio(x1)? > ratio(x2)? {
                    b = x2;
                } else {
                    a = x1;
                }
            }
            Ok(best.0.max(ratio(0.5 * (a + b))?))
        }
        InputKind::Discrete { points, probs } => {
            let pts: Vec<f64> = points.iter().flatten().copied().collect();
            let mut starts = axis_starts(d);
            starts.extend(points.iter().take(256).cloned());
            let spec = sym_eigen(input.covariance());
            starts.extend((0..d).map(|j| spec.vector(j)));
            let (log_ratio, _) = sphere_max(d, &starts, |w| {
                let (mut a, mut b) = (0.0, 0.0);
                let mut ga = vec![0.0; d];
                let mut gb = vec![0.0; d];
                for (x, p) in pts.chunks_exact(d).zip(probs) {
                    let u = dot(w, x);
                    let au = u.abs();
                    a += p * au.powf(num_p);
                    b += p * au.powf(den_p);
                    let da = if au > 0.0 { p * num_p * au.powf(num_p - 1.0) * u.signum() } else { 0.0 };
                    let db = if au > 0.0 { p * den_p * au.powf(den_p - 1.0) * u.signum() } else { 0.0 };
                    for i in 0..d {
                        ga[i] += da * x[i];
                        gb[i] += db * x[i];
                    }
                }
                let val = a.ln() / num_p - b.ln() / den_p;
                let grad = (0..d).map(|i| ga[i] / (num_p * a) - gb[i] / (den_p * b)).collect();
                (val, grad)
            });
            Ok(log_ratio.exp())
        }
    }
}

/// `N(P_X, p) = sup_w E[|<w,X>|^p]^{1/p} / E[<w,X>^2]^{1/2}`, a certified
/// lower bound for discrete laws (best direction found) and exact otherwise.
pub fn norm_equivalence(input: &InputDist, p: f64) -> Result<f64> {
    if !(p > 2.0) || !p.is_finite() {
        return invalid(format!("norm equivalence needs finite p > 2, got {p}"));
    }
    Ok(directional_ratio(input, p, 2.0)?.max(1.0))
}

/// `theta(P_X) = sup_w E[<w,X>^2]^{1/2} / E|<w,X>|`, with the same semantics
/// as [`norm_equivalence`].
pub fn small_ball_ratio(input: &InputDist) -> Result<f64> {
    Ok(directional_ratio(input, 2.0, 1.0)?.max(1.0))
}
