//! Clamping, stable sorting and the trimmed sum `phi_k`.
//!
//! `phi_k(a) = sum_i clamp(a_i; a*_{1+k}, a*_{n-k})` where `a*` is `a` sorted
//! increasingly. Every entry is clamped into the band spanned by the
//! `(k+1)`-th smallest and `(k+1)`-th largest values, so at most `k` entries
//! on each side can move the total arbitrarily.

use crate::error::{invalid, Result};

/// `min(max(x, alpha), beta)`.
pub fn clamp(x: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha <= beta) {
        return invalid(format!("clamp needs alpha <= beta, got ({alpha}, {beta})"));
    }
    Ok(clamp_unchecked(x, alpha, beta))
}

#[inline]
pub(crate) fn clamp_unchecked(x: f64, alpha: f64, beta: f64) -> f64 {
    x.max(alpha).min(beta)
}

/// Sorted copy of `a` and the stable permutation `pi` with `sorted[i] = a[pi[i]]`.
pub fn sort_star(a: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut perm: Vec<usize> = (0..a.len()).collect();
    perm.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    let sorted = perm.iter().map(|&i| a[i]).collect();
    (sorted, perm)
}

/// Trim level `k` for sequences of length `n`, with `1 <= k <= (n - 1) / 2`.
///
/// For even `n` the level `k = n / 2` would put the lower clamp bound above
/// the upper one, so it is excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrimLevel {
    k: usize,
    n: usize,
}

impl TrimLevel {
    pub fn new(k: usize, n: usize) -> Result<Self> {
        if k == 0 || 2 * k + 1 > n {
            return invalid(format!("trim level k={k} must lie in [1, {}] for n={n}", n.saturating_sub(1) / 2));
        }
        Ok(Self { k, n })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return invalid(format!("sequence has length {len}, trim level expects {}", self.n));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrimmedSumBreakdown {
    pub sorted: Vec<f64>,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub clamped_total: f64,
    pub sort_permutation: Vec<usize>,
}

pub fn trimmed_sum(a: &[f64], trim: TrimLevel) -> Result<TrimmedSumBreakdown> {
    trim.check_len(a.len())?;
    if a.iter().any(|v| v.is_nan()) {
        return invalid("trimmed sum input contains NaN");
    }
    let (sorted, perm) = sort_star(a);
    let k = trim.k;
    let lower_bound = sorted[k];
    let upper_bound = sorted[a.len() - 1 - k];
    let clamped_total = a
        .iter()
        .map(|&x| clamp_unchecked(x, lower_bound, upper_bound))
        .sum();
    Ok(TrimmedSumBreakdown {
        sorted,
        lower_bound,
        upper_bound,
        clamped_total,
        sort_permutation: perm,
    })
}

/// Per-entry weights of the trimmed-sum subgradient, indexed like `a`.
///
/// Ranks `k+1..=n-k` get weight one; the two boundary ranks get an extra `k`
/// each. Weights are nonnegative and sum to `n`.
pub fn trimmed_sum_weights(a: &[f64], trim: TrimLevel) -> Result<Vec<f64>> {
    trim.check_len(a.len())?;
    let (_, perm) = sort_star(a);
    let n = a.len();
    let k = trim.k;
    let mut w = vec![0.0; n];
    for &i in &perm[k..n - k] {
        w[i] = 1.0;
    }
    w[perm[k]] += k as f64;
    w[perm[n - 1 - k]] += k as f64;
    Ok(w)
}

/// `sum_i w_i grads[i]` with the weights of [`trimmed_sum_weights`].
pub fn trimmed_sum_subgradient(a: &[f64], grads: &[Vec<f64>], trim: TrimLevel) -> Result<Vec<f64>> {
    if grads.len() != a.len() {
        return invalid(format!("{} gradients for {} entries", grads.len(), a.len()));
    }
    let d = grads.first().map_or(0, Vec::len);
    if grads.iter().any(|g| g.len() != d) {
        return invalid("gradients have inconsistent dimensions");
    }
    let w = trimmed_sum_weights(a, trim)?;
    let mut out = vec![0.0; d];
    for (wi, g) in w.iter().zip(grads) {
        if *wi != 0.0 {
            for (o, gj) in out.iter_mut().zip(g) {
                *o += wi * gj;
            }
        }
    }
    Ok(out)
}

/// Clamp bounds `(a*_{1+k}, a*_{n-k})` and the indices attaining them, by
/// linear-time selection. Ties resolve by original index, as in [`sort_star`].
pub(crate) fn select_bounds(a: &[f64], k: usize, scratch: &mut Vec<(f64, usize)>) -> ((f64, usize), (f64, usize)) {
    let n = a.len();
    scratch.clear();
    scratch.extend(a.iter().copied().zip(0..));
    let cmp = |x: &(f64, usize), y: &(f64, usize)| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1));
    let (_, lo, rest) = scratch.select_nth_unstable_by(k, cmp);
    let lo = *lo;
    debug_assert!(2 * k < n);
    let hi = if n - 1 - k == k {
        lo
    } else {
        // the upper bound sits among the entries above rank k
        let offset = n - 1 - k - (k + 1);
        *rest.select_nth_unstable_by(offset, cmp).1
    };
    (lo, hi)
}

/// Trimmed sum and its subgradient weights in `O(n)`; the fast path used by
/// the estimators. Weights are written into `weights`.
pub(crate) fn trimmed_sum_fast(
    a: &[f64],
    k: usize,
    weights: &mut [f64],
    scratch: &mut Vec<(f64, usize)>,
) -> f64 {
    let ((lo, ilo), (hi, ihi)) = select_bounds(a, k, scratch);
    let mut total = 0.0;
    for (i, (&x, w)) in a.iter().zip(weights.iter_mut()).enumerate() {
        // same total order as sort_star, so -0.0 ranks below 0.0
        let above_lo = x.total_cmp(&lo).then(i.cmp(&ilo)).is_ge();
        let below_hi = x.total_cmp(&hi).then(i.cmp(&ihi)).is_le();
        *w = if above_lo && below_hi { 1.0 } else { 0.0 };
        total += clamp_unchecked(x, lo, hi);
    }
    weights[ilo] += k as f64;
    weights[ihi] += k as f64;
    total
}

/// Sum of the middle `n - 2k` sorted entries, `sum_{i=k+1}^{n-k} a*_i`.
pub fn middle_sum(a: &[f64], k: usize) -> Result<f64> {
    if 2 * k > a.len() {
        return invalid(format!("cannot drop {k} entries from each end of {}", a.len()));
    }
    let (sorted, _) = sort_star(a);
    Ok(sorted[k..a.len() - k].iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use proptest::prelude::*;

    fn total(a: &[f64], k: usize) -> f64 {
        trimmed_sum(a, TrimLevel::new(k, a.len()).unwrap()).unwrap().clamped_total
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp(5.0, 0.0, 3.0).unwrap(), 3.0);
        assert_eq!(clamp(2.0, 0.0, 3.0).unwrap(), 2.0);
        assert_eq!(clamp(-7.0, 1.0, 3.0).unwrap(), 1.0);
        assert!(clamp(0.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn sort_star_is_stable() {
        assert_eq!(sort_star(&[3.0, 1.0, 2.0]), (vec![1.0, 2.0, 3.0], vec![1, 2, 0]));
        assert_eq!(sort_star(&[5.0, 5.0, 1.0]), (vec![1.0, 5.0, 5.0], vec![2, 0, 1]));
        assert_eq!(sort_star(&[4.0]), (vec![4.0], vec![0]));
    }

    #[test]
    fn trimmed_sum_examples() {
        let b = trimmed_sum(&[10.0, 1.0, 2.0, 3.0, -7.0], TrimLevel::new(1, 5).unwrap()).unwrap();
        assert_eq!((b.lower_bound, b.upper_bound, b.clamped_total), (1.0, 3.0, 10.0));
        for k in 1..=3 {
            assert_eq!(total(&[2.5; 7], k), 17.5);
        }
        let b = trimmed_sum(&[0.0, 0.0, 0.0, 100.0], TrimLevel::new(1, 4).unwrap()).unwrap();
        assert_eq!((b.lower_bound, b.upper_bound, b.clamped_total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn trim_level_range() {
        assert!(TrimLevel::new(0, 4).is_err());
        assert!(TrimLevel::new(3, 5).is_err());
        assert!(TrimLevel::new(2, 5).is_ok());
        assert!(TrimLevel::new(2, 4).is_err());
        assert!(TrimLevel::new(1, 2).is_err());
        let t = TrimLevel::new(1, 3).unwrap();
        assert!(trimmed_sum(&[1.0, 2.0], t).is_err());
    }

    #[test]
    fn subgradient_examples() {
        let a = [0.3, -1.2, 4.0, 2.2, 0.9, -0.1];
        let ones: Vec<Vec<f64>> = a.iter().map(|_| vec![1.0]).collect();
        for k in 1..=2 {
            let g = trimmed_sum_subgradient(&a, &ones, TrimLevel::new(k, 6).unwrap()).unwrap();
            assert_eq!(g, vec![6.0]);
        }
        let a = [7.0, -2.0, 1.0];
        let grads = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![5.0, -3.0]];
        let g = trimmed_sum_subgradient(&a, &grads, TrimLevel::new(1, 3).unwrap()).unwrap();
        assert_eq!(g, vec![15.0, -9.0]);
        let constant = vec![vec![0.5, -2.0]; 6];
        let a = [0.3, -1.2, 4.0, 2.2, 0.9, -0.1];
        let g = trimmed_sum_subgradient(&a, &constant, TrimLevel::new(2, 6).unwrap()).unwrap();
        assert_eq!(g, vec![3.0, -12.0]);
        assert!(trimmed_sum_subgradient(&a, &constant[..5], TrimLevel::new(2, 6).unwrap()).is_err());
    }

    #[test]
    fn subgradient_matches_finite_differences() {
        let mut rng = RngStream::new(5, 0);
        for _ in 0..200 {
            let n = 5 + (rng.uniform_open() * 20.0) as usize;
            let k = (1 + (rng.uniform_open() * ((n - 1) / 2) as f64) as usize).min((n - 1) / 2);
            let base: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let dir: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let trim = TrimLevel::new(k, n).unwrap();
            let grads: Vec<Vec<f64>> = dir.iter().map(|d| vec![*d]).collect();
            let g = trimmed_sum_subgradient(&base, &grads, trim).unwrap()[0];
            let h = 1e-7;
            let plus: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + h * d).collect();
            let minus: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b - h * d).collect();
            let fd = (total(&plus, k) - total(&minus, k)) / (2.0 * h);
            assert!((fd - g).abs() < 1e-5, "n={n} k={k} fd={fd} g={g}");
        }
    }

    #[test]
    fn fast_path_matches_sorting() {
        let mut rng = RngStream::new(6, 0);
        let mut scratch = Vec::new();
        for _ in 0..500 {
            let n = 3 + (rng.uniform_open() * 40.0) as usize;
            let k = (1 + (rng.uniform_open() * ((n - 1) / 2) as f64) as usize).min((n - 1) / 2);
            // coarse rounding creates ties
            let a: Vec<f64> = (0..n).map(|_| (rng.normal() * 2.0).round()).collect();
            let trim = TrimLevel::new(k, n).unwrap();
            let mut w = vec![0.0; n];
            let fast = trimmed_sum_fast(&a, k, &mut w, &mut scratch);
            assert_eq!(fast, trimmed_sum(&a, trim).unwrap().clamped_total);
            assert_eq!(w, trimmed_sum_weights(&a, trim).unwrap());
        }
    }

    #[test]
    fn clamp_identities_exact() {
        let mut rng = RngStream::new(7, 0);
        let dyadic = |rng: &mut RngStream| (rng.normal() * 64.0).round() / 8.0;
        for _ in 0..1000 {
            let (mut alpha, mut beta) = (dyadic(&mut rng), dyadic(&mut rng));
            if alpha > beta {
                std::mem::swap(&mut alpha, &mut beta);
            }
            let x = dyadic(&mut rng);
            let y = dyadic(&mut rng);
            let c = (rng.uniform_open() * 16.0).round() / 4.0;
            let f = |x, a, b| clamp(x, a, b).unwrap();
            assert_eq!(c * f(x, alpha, beta), f(c * x, c * alpha, c * beta));
            assert_eq!(-f(x, alpha, beta), f(-x, -beta, -alpha));
            assert_eq!(f(x, alpha, beta) + y, f(x + y, alpha + y, beta + y));
        }
    }

    fn integer_vec() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec((-50i32..50).prop_map(f64::from), 3..30)
    }

    proptest! {
        #[test]
        fn scaling_and_shift(a in integer_vec(), c in -8i32..8, kk in 0usize..100) {
            let n = a.len();
            let k = 1 + kk % ((n - 1) / 2);
            let c = f64::from(c);
            let scaled: Vec<f64> = a.iter().map(|x| c * x).collect();
            prop_assert_eq!(total(&scaled, k), c * total(&a, k));
            let shifted: Vec<f64> = a.iter().map(|x| x + c).collect();
            prop_assert_eq!(total(&shifted, k), total(&a, k) + n as f64 * c);
        }

        #[test]
        fn monotone_and_superadditive(
            pairs in proptest::collection::vec((-50i32..50, 0i32..30), 3..30),
            kk in 0usize..100,
        ) {
            let n = pairs.len();
            let k = 1 + kk % ((n - 1) / 2);
            let a: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
            let b: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
            let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            prop_assert!(total(&a, k) <= total(&ab, k));
            let (bs, _) = sort_star(&b);
            let smallest: f64 = bs[..n - 2 * k].iter().sum();
            prop_assert!(total(&ab, k) >= total(&a, k) + smallest);
        }

        #[test]
        fn weights_conserve_mass(a in integer_vec(), kk in 0usize..100) {
            let n = a.len();
            let k = 1 + kk % ((n - 1) / 2);
            let w = trimmed_sum_weights(&a, TrimLevel::new(k, n).unwrap()).unwrap();
            prop_assert!(w.iter().all(|x| *x >= 0.0));
            prop_assert_eq!(w.iter().sum::<f64>(), n as f64);
        }
    }
}
