//! Lower empirical quantiles and pseudo-inverses.
//!
//! The quantile of a sample at level `p` is the smallest order statistic whose
//! empirical CDF is at least `p`: the `ceil(p * M)`-th value (1-indexed) of the
//! sorted sample. No interpolation is done, so `Q_{phi(X)} = phi(Q_X)` holds
//! exactly for every strictly increasing `phi`. `f64::INFINITY` stands for an
//! infinite loss and sorts last.

use crate::error::{invalid, Error, Result};

/// A sorted sample of extended reals in `(-inf, +inf]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("empirical distribution needs at least one value");
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return invalid("sample values must be finite or +inf");
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.values
    }

    /// Fraction of values `<= t`.
    pub fn cdf(&self, t: f64) -> f64 {
        let count = self.values.partition_point(|v| *v <= t);
        count as f64 / self.values.len() as f64
    }

    /// 1-indexed rank of the lower quantile: the smallest `j` with `j / M >= level`.
    fn quantile_rank(&self, level: f64) -> usize {
        let m = self.values.len();
        let mut j = ((level * m as f64).ceil() as usize).clamp(1, m);
        while j > 1 && (j - 1) as f64 / m as f64 >= level {
            j -= 1;
        }
        while j < m && (j as f64) / (m as f64) < level {
            j += 1;
        }
        j
    }

    /// Lower quantile value at `level`, without the uncertainty proxy.
    pub fn quantile_value(&self, level: f64) -> Result<f64> {
        check_level(level)?;
        Ok(self.values[self.quantile_rank(level) - 1])
    }

    /// Applies a strictly increasing map, with `phi(inf) = inf`.
    pub fn map_increasing(&self, phi: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .map(|&v| if v == f64::INFINITY { v } else { phi(v) })
            .collect();
        Self::new(values)
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(format!("level must be in (0, 1), got {level}")))
    }
}

/// An empirical `level`-quantile with a Monte Carlo uncertainty proxy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileEstimate {
    pub level: f64,
    pub value: f64,
    pub replicates: usize,
    /// Order statistics at `level -/+ 1.96 sqrt(level (1 - level) / M)`.
    pub ci_low: f64,
    pub ci_high: f64,
    /// `(ci_high - ci_low) / (2 * 1.96)`: a standard-error scale for `value`.
    pub se_proxy: f64,
}

impl QuantileEstimate {
    pub fn is_infinite(&self) -> bool {
        self.value == f64::INFINITY
    }

    /// `sqrt(se_a^2 + se_b^2)`.
    pub fn combined_se(&self, other: &QuantileEstimate) -> f64 {
        self.se_proxy.hypot(other.se_proxy)
    }
}

/// Lower empirical quantile at `level`.
pub fn empirical_quantile(sample: &EmpiricalDistribution, level: f64) -> Result<QuantileEstimate> {
    check_level(level)?;
    let m = sample.len();
    let value = sample.values[sample.quantile_rank(level) - 1];
    let h = 1.96 * (level * (1.0 - level) / m as f64).sqrt();
    let lo_level = level - h;
    let hi_level = level + h;
    let ci_low = if lo_level <= 0.0 {
        sample.values[0]
    } else {
        sample.values[sample.quantile_rank(lo_level) - 1]
    };
    let ci_high = if hi_level >= 1.0 {
        sample.values[m - 1]
    } else {
        sample.values[sample.quantile_rank(hi_level) - 1]
    };
    let se_proxy = if ci_high == f64::INFINITY {
        f64::INFINITY
    } else {
        (ci_high - ci_low) / (2.0 * 1.96)
    };
    Ok(QuantileEstimate {
        level,
        value,
        replicates: m,
        ci_low,
        ci_high,
        se_proxy,
    })
}

/// Right-continuous nondecreasing step function: `left_value` below
/// `xs[0]`, and `values[j]` on `[xs[j], xs[j + 1])`.
#[derive(Debug, Clone)]
pub struct StepFunction {
    xs: Vec<f64>,
    values: Vec<f64>,
    left_value: f64,
}

impl StepFunction {
    pub fn new(xs: Vec<f64>, values: Vec<f64>, left_value: f64) -> Result<Self> {
        if xs.len() != values.len() {
            return invalid("breakpoints and values must have equal length");
        }
        if xs.iter().chain(&values).any(|v| v.is_nan()) || left_value.is_nan() {
            return invalid("step function entries must not be NaN");
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("breakpoints must be strictly increasing");
        }
        let nondecreasing = values.windows(2).all(|w| w[0] <= w[1])
            && values.first().is_none_or(|v| left_value <= *v);
        if !nondecreasing {
            return invalid("step function must be nondecreasing");
        }
        Ok(Self { xs, values, left_value })
    }

    /// Empirical CDF of a sample: jumps of `1/M` at each value.
    pub fn ecdf(sample: &EmpiricalDistribution) -> Self {
        let m = sample.len() as f64;
        let mut xs: Vec<f64> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for (i, &v) in sample.sorted().iter().enumerate() {
            if v == f64::INFINITY {
                break;
            }
            let f = (i + 1) as f64 / m;
            if xs.last() == Some(&v) {
                *values.last_mut().unwrap() = f;
            } else {
                xs.push(v);
                values.push(f);
            }
        }
        Self {
            xs,
            values,
            left_value: 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.xs.partition_point(|b| *b <= x);
        if idx == 0 {
            self.left_value
        } else {
            self.values[idx - 1]
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }
}

/// `f^-(y) = inf { x : f(x) >= y }`, with `inf(empty) = +inf` and `-inf` when
/// the level set is the whole line.
pub fn pseudo_inverse_point(f: &StepFunction, y: f64) -> f64 {
    if f.left_value >= y {
        return f64::NEG_INFINITY;
    }
    let idx = f.values.partition_point(|v| *v < y);
    if idx == f.values.len() {
        f64::INFINITY
    } else {
        f.xs[idx]
    }
}

/// `Q_{phi(X)}(level) == phi(Q_X(level))`, compared exactly.
pub fn check_transform_invariance(
    sample: &EmpiricalDistribution,
    phi: impl Fn(f64) -> f64,
    level: f64,
) -> Result<bool> {
    let apply = |v: f64| if v == f64::INFINITY { v } else { phi(v) };
    let lhs = sample.map_increasing(&phi)?.quantile_value(level)?;
    let rhs = apply(sample.quantile_value(level)?);
    Ok(lhs == rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(empirical_quantile(&dist(&[4.0, 1.0, 3.0, 2.0]), 0.5).unwrap().value, 2.0);
        for level in [0.01, 0.5, 0.99] {
            assert_eq!(empirical_quantile(&dist(&[7.0]), level).unwrap().value, 7.0);
        }
        let mut v = vec![0.0; 99];
        v.push(f64::INFINITY);
        let q = empirical_quantile(&dist(&v), 0.995).unwrap();
        assert!(q.is_infinite());
        assert_eq!(empirical_quantile(&dist(&v), 0.99).unwrap().value, 0.0);
    }

    #[test]
    fn rank_is_robust_to_level_rounding() {
        // 0.9 * 50000 is not exactly 45000 in floating point
        let v: Vec<f64> = (1..=50_000).map(|i| i as f64).collect();
        assert_eq!(dist(&v).quantile_value(0.9).unwrap(), 45_000.0);
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(dist(&v).quantile_value(0.07).unwrap(), 7.0);
    }

    #[test]
    fn rejects_bad_levels_and_values() {
        let d = dist(&[1.0, 2.0]);
        for level in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(empirical_quantile(&d, level), Err(Error::InvalidLevel(_))));
        }
        assert!(EmpiricalDistribution::new(vec![]).is_err());
        assert!(EmpiricalDistribution::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn pseudo_inverse_examples() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let identity = StepFunction::new(grid.clone(), grid.clone(), f64::NEG_INFINITY).unwrap();
        assert_eq!(pseudo_inverse_point(&identity, 0.3), 0.3);
        let one = StepFunction::new(vec![], vec![], 1.0).unwrap();
        assert_eq!(pseudo_inverse_point(&one, 2.0), f64::INFINITY);
        assert_eq!(pseudo_inverse_point(&one, 0.5), f64::NEG_INFINITY);
        let point_mass = StepFunction::new(vec![5.0], vec![1.0], 0.0).unwrap();
        assert_eq!(pseudo_inverse_point(&point_mass, 0.5), 5.0);
        assert!(StepFunction::new(vec![1.0, 0.0], vec![0.1, 0.2], 0.0).is_err());
    }

    #[test]
    fn transform_invariance_examples() {
        let d = dist(&[1.0, 4.0, 9.0]);
        assert!(check_transform_invariance(&d, |t| 2.0 * t, 0.5).unwrap());
        assert!(check_transform_invariance(&d, f64::exp, 0.9).unwrap());
        let d = dist(&[1.0, f64::INFINITY, 3.0]);
        assert!(check_transform_invariance(&d, |t| t.powi(3) + t, 0.9).unwrap());
    }

    #[test]
    fn ecdf_pseudo_inverse_is_the_quantile() {
        let d = dist(&[3.0, 1.0, 1.0, 2.0, 5.0]);
        let f = StepFunction::ecdf(&d);
        for level in [0.1, 0.2, 0.4, 0.41, 0.6, 0.8, 0.99] {
            assert_eq!(pseudo_inverse_point(&f, level), d.quantile_value(level).unwrap());
        }
    }

    #[test]
    fn se_proxy_shrinks_with_replicates() {
        let small: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let large: Vec<f64> = (0..10_000).map(|i| i as f64 / 10_000.0).collect();
        let a = empirical_quantile(&dist(&small), 0.9).unwrap();
        let b = empirical_quantile(&dist(&large), 0.9).unwrap();
        assert!(b.se_proxy < a.se_proxy);
        assert!(a.ci_low <= a.value && a.value <= a.ci_high);
        // uniform: se ~ sqrt(p(1-p)/M) = 0.03 at M = 100
        assert!((a.se_proxy - 0.03).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn quantile_is_minimal_with_enough_mass(
            v in proptest::collection::vec(-100i32..100, 1..60),
            level in 0.001f64..0.999,
        ) {
            let d = dist(&v.iter().map(|x| *x as f64).collect::<Vec<_>>());
            let q = d.quantile_value(level).unwrap();
            prop_assert!(d.cdf(q) >= level);
            for &x in d.sorted() {
                if x < q {
                    prop_assert!(d.cdf(x) < level);
                }
            }
        }

        #[test]
        fn pseudo_inverse_of_image_is_below(
            steps in proptest::collection::vec((0.01f64..1.0, 0.0f64..1.0), 1..20),
            x in -1.0f64..25.0,
        ) {
            let mut xs = Vec::new();
            let mut vals = Vec::new();
            let (mut pos, mut level) = (0.0, 0.0);
            for (dx, dv) in steps {
                pos += dx;
                level += dv;
                xs.push(pos);
                vals.push(level);
            }
            let f = StepFunction::new(xs, vals, -1.0).unwrap();
            prop_assert!(pseudo_inverse_point(&f, f.eval(x)) <= x);
        }

        #[test]
        fn pseudo_inverse_is_antitone(
            base in proptest::collection::vec(0.0f64..1.0, 2..20),
            bump in proptest::collection::vec(0.0f64..1.0, 2..20),
            y in -0.5f64..30.0,
        ) {
            let n = base.len().min(bump.len());
            let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let mut g = Vec::with_capacity(n);
            let mut acc = 0.0;
            for b in &base[..n] {
                acc += b;
                g.push(acc);
            }
            let mut f = Vec::with_capacity(n);
            let mut extra = 0.0;
            for (gi, b) in g.iter().zip(&bump[..n]) {
                extra += b;
                f.push(gi + extra);
            }
            let fs = StepFunction::new(xs.clone(), f, 0.0).unwrap();
            let gs = StepFunction::new(xs, g, 0.0).unwrap();
            prop_assert!(pseudo_inverse_point(&fs, y) <= pseudo_inverse_point(&gs, y));
        }
    }

    #[test]
    fn transform_invariance_on_random_piecewise_linear_maps() {
        use crate::numerics::RngStream;
        let mut rng = RngStream::new(99, 0);
        for _ in 0..1000 {
            let m = 1 + (rng.uniform_open() * 50.0) as usize;
            let mut v: Vec<f64> = (0..m).map(|_| (rng.normal() * 4.0).round() / 4.0).collect();
            if rng.uniform_open() < 0.2 {
                v.push(f64::INFINITY);
            }
            // strictly increasing piecewise-linear map with random slopes
            let knots: Vec<f64> = {
                let mut k: Vec<f64> = (0..5).map(|_| rng.normal() * 3.0).collect();
                k.sort_by(f64::total_cmp);
                k
            };
            let slopes: Vec<f64> = (0..6).map(|_| 0.1 + rng.uniform_open() * 3.0).collect();
            let phi = |t: f64| {
                let mut y = slopes[0] * t;
                for (i, k) in knots.iter().enumerate() {
                    if t > *k {
                        y += (slopes[i + 1] - slopes[i]) * (t - k);
                    }
                }
                y
            };
            let level = rng.uniform_open();
            let d = dist(&v);
            assert!(check_transform_invariance(&d, phi, level).unwrap());
        }
    }
}
