//! Gauss-Hermite quadrature for Gaussian expectations.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

pub const MIN_NODES: usize = 8;
pub const MAX_NODES: usize = 256;

/// Nodes and weights for `int f(x) exp(-x^2) dx`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub-Welsch: nodes are the eigenvalues of the symmetric tridiagonal
    /// Jacobi matrix of the Hermite recurrence, polished by Newton steps on the
    /// orthonormal recurrence, which also yields the weights.
    pub fn new(n: usize) -> Result<Self> {
        if !(MIN_NODES..=MAX_NODES).contains(&n) {
            return invalid(format!("node count must be in [{MIN_NODES}, {MAX_NODES}], got {n}"));
        }
        let mut diag = vec![0.0; n];
        let mut off: Vec<f64> = (1..=n).map(|i| if i < n { (i as f64 / 2.0).sqrt() } else { 0.0 }).collect();
        tridiagonal_ql(&mut diag, &mut off);
        diag.sort_by(f64::total_cmp);

        let pim4 = PI.powf(-0.25);
        let nf = n as f64;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for &x0 in &diag {
            let mut z = x0;
            let mut pp = 0.0;
            for _ in 0..3 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                z -= p1 / pp;
            }
            nodes.push(z);
            weights.push(2.0 / (pp * pp));
        }
        // enforce exact symmetry of the rule
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[j]);
            nodes[i] = -x;
            nodes[j] = x;
            weights[i] = w;
            weights[j] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(eta)]` for `eta ~ N(0, sigma^2)`.
    pub fn expectation(&self, sigma: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let scale = std::f64::consts::SQRT_2 * sigma;
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(scale * x))
            .sum();
        s / PI.sqrt()
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with Wilkinson
/// shifts. `off[i]` couples rows `i` and `i + 1`; the last entry is ignored.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    e[n - 1] = 0.0;
    for l in 0..n {
        for _ in 0..200 {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

/// `E[f(eta)]`, `eta ~ N(0, sigma^2)`, with an `nodes`-point rule. Exact up to
/// rounding for polynomials of degree at most `2 * nodes - 1`.
pub fn gauss_hermite_expectation(f: impl FnMut(f64) -> f64, sigma: f64, nodes: usize) -> Result<f64> {
    if !(sigma > 0.0) {
        return invalid(format!("sigma must be positive, got {sigma}"));
    }
    Ok(GaussHermite::new(nodes)?.expectation(sigma, f))
}

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp = 1.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// `int_a^b f`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }
}

/// Half-width of the integration window for Gaussian expectations, in units
/// of sigma. The neglected tail mass is below 1e-30.
const GAUSS_WINDOW: f64 = 12.0;
const PANELS_PER_PIECE: usize = 8;

const GRADING_RATIO: f64 = 0.2;
const GRADING_LEVELS: i32 = 14;

/// Panel boundaries for `[a, b]`, graded geometrically toward kinked ends.
fn graded_panels(a: f64, b: f64, kink_a: bool, kink_b: bool, levels: i32, out: &mut Vec<f64>) {
    match (kink_a, kink_b) {
        (false, false) => {
            let width = (b - a) / PANELS_PER_PIECE as f64;
            out.extend((0..=PANELS_PER_PIECE).map(|p| a + p as f64 * width));
            out[PANELS_PER_PIECE] = b;
        }
        (true, false) => {
            out.push(a);
            out.extend((0..=levels).rev().map(|j| a + (b - a) * GRADING_RATIO.powi(j)));
            let last = out.len() - 1;
            out[last] = b;
        }
        (false, true) => {
            out.push(a);
            out.extend((1..=levels).map(|j| b - (b - a) * GRADING_RATIO.powi(j)));
            out.push(b);
        }
        (true, true) => {
            let mid = 0.5 * (a + b);
            graded_panels(a, mid, true, false, levels, out);
            out.pop();
            graded_panels(mid, b, false, true, levels, out);
        }
    }
}

/// Grading depth toward integrable endpoint singularities.
const SINGULAR_END_LEVELS: i32 = 45;

/// `int_lo^hi f` for integrands smooth except at `kinks`, where panels are
/// graded geometrically. With `graded_ends` the endpoints are graded much
/// more deeply, which suits integrable power singularities there.
pub fn integrate_graded(
    rule: &GaussLegendre,
    lo: f64,
    hi: f64,
    kinks: &[f64],
    graded_ends: bool,
    mut f: impl FnMut(f64) -> f64,
) -> f64 {
    let mut singular: Vec<f64> = kinks.iter().copied().filter(|k| *k > lo && *k < hi).collect();
    if graded_ends {
        singular.extend([lo, hi]);
    }
    let end_levels = if graded_ends { SINGULAR_END_LEVELS } else { GRADING_LEVELS };
    singular.sort_by(f64::total_cmp);
    singular.dedup();
    let mut cuts: Vec<f64> = vec![lo, hi];
    cuts.extend(&singular);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let is_kink = |x: f64| singular.binary_search_by(|k| k.total_cmp(&x)).is_ok();
    let mut total = 0.0;
    let mut panels = Vec::new();
    for w in cuts.windows(2) {
        panels.clear();
        let levels = if w[0] == lo || w[1] == hi { end_levels } else { GRADING_LEVELS };
        graded_panels(w[0], w[1], is_kink(w[0]), is_kink(w[1]), levels, &mut panels);
        for p in panels.windows(2) {
            total += rule.integrate(p[0], p[1], &mut f);
        }
    }
    total
}

/// `E[f(eta)]`, `eta ~ N(0, sigma^2)`, for integrands that are smooth except
/// at the listed `kinks`. Each smooth piece of `[-12 sigma, 12 sigma]` is
/// integrated with composite Gauss-Legendre panels.
pub fn normal_expectation_piecewise(
    rule: &GaussLegendre,
    sigma: f64,
    kinks: &[f64],
    mut f: impl FnMut(f64) -> f64,
) -> f64 {
    let lo = -GAUSS_WINDOW * sigma;
    let hi = GAUSS_WINDOW * sigma;
    let mut cuts: Vec<f64> = kinks.to_vec();
    // the density's peak at 0 is a natural panel boundary
    let norm = 1.0 / (sigma * (2.0 * PI).sqrt());
    let density_f = |t: f64| f(t) * norm * (-0.5 * (t / sigma) * (t / sigma)).exp();
    cuts.retain(|k| *k > lo && *k < hi);
    let zero_is_kink = cuts.contains(&0.0);
    if zero_is_kink {
        integrate_graded(rule, lo, hi, &cuts, false, density_f)
    } else {
        let mut f = density_f;
        let left: Vec<f64> = cuts.iter().copied().filter(|k| *k < 0.0).collect();
        let right: Vec<f64> = cuts.iter().copied().filter(|k| *k > 0.0).collect();
        integrate_graded(rule, lo, 0.0, &left, false, &mut f) + integrate_graded(rule, 0.0, hi, &right, false, &mut f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_sqrt_pi() {
        for n in [8, 16, 64, 128, 256] {
            let gh = GaussHermite::new(n).unwrap();
            let s: f64 = gh.weights().iter().sum();
            assert!((s - PI.sqrt()).abs() < 1e-12, "n = {n}: {s}");
            assert!(gh.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn gaussian_moments() {
        let m2 = gauss_hermite_expectation(|t| t * t, 1.0, 16).unwrap();
        assert!((m2 - 1.0).abs() < 1e-13);
        let m4 = gauss_hermite_expectation(|t| t.powi(4), 1.0, 16).unwrap();
        assert!((m4 - 3.0).abs() < 1e-12);
        let m4s = gauss_hermite_expectation(|t| t.powi(4), 2.0, 16).unwrap();
        assert!((m4s - 48.0).abs() < 1e-11);
        let abs = gauss_hermite_expectation(f64::abs, 1.0, 256).unwrap();
        // the kink at 0 limits Hermite accuracy for |t|
        assert!((abs - (2.0 / PI).sqrt()).abs() < 2e-3);
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        // E[Z^{2m}] = (2m-1)!!; with 8 nodes exact up to degree 15
        let m14 = gauss_hermite_expectation(|t| t.powi(14), 1.0, 8).unwrap();
        assert!((m14 - 135_135.0).abs() < 1e-8 * 135_135.0);
    }

    #[test]
    fn piecewise_rule_handles_kinks() {
        let gl = GaussLegendre::new(32);
        let abs = normal_expectation_piecewise(&gl, 1.0, &[], f64::abs);
        assert!((abs - (2.0 / PI).sqrt()).abs() < 1e-13);
        // E|Z + 0.7|^{2.5} against the Hermite rule on a smooth shifted polynomial is
        // not available in closed form; compare E(Z + c)^4 instead.
        let c = 0.7;
        let m4 = normal_expectation_piecewise(&gl, 1.0, &[-c], |t| (t + c).powi(4));
        let exact = c.powi(4) + 6.0 * c * c + 3.0;
        assert!((m4 - exact).abs() < 1e-12);
        let p = 2.5;
        let m = normal_expectation_piecewise(&gl, 2.0, &[0.0], |t| t.abs().powf(p));
        let exact = 2f64.powf(p) * crate::numerics::std_normal_abs_moment(p).unwrap();
        assert!((m - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let gl = GaussLegendre::new(10);
        let v = gl.integrate(0.0, 2.0, |x| x.powi(19));
        let exact = 2f64.powi(20) / 20.0;
        assert!((v - exact).abs() < 1e-13 * exact);
    }

    #[test]
    fn rejects_node_counts_out_of_range() {
        assert!(GaussHermite::new(7).is_err());
        assert!(GaussHermite::new(257).is_err());
    }
}
