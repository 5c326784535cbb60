use qrisk_core::distributions::{InputDist, NoiseModel, ProblemSpec};
use qrisk_core::estimators::{ErrorFn, MinMaxConfig};
use qrisk_core::numerics::{chi_square_quantile, RngStream};
use qrisk_core::quantile::empirical_quantile;
use qrisk_core::risk::{gauss_minimax_exact_mc, quantile_risk_mc, Estimator};

fn gaussian_spec(d: usize, sigma2: f64) -> ProblemSpec {
    ProblemSpec::new(
        InputDist::standard_gaussian(d).unwrap(),
        (0..d).map(|j| j as f64 - 0.5).collect(),
        NoiseModel::gaussian(sigma2).unwrap(),
        ErrorFn::Square,
    )
    .unwrap()
}

#[test]
fn zero_noise_ols_has_zero_risk() {
    let r = quantile_risk_mc(&gaussian_spec(2, 0.0), &Estimator::Ols, 10, 0.1, 200, &RngStream::new(1, 0)).unwrap();
    assert!(r.quantile_risk.value < 1e-20);
    assert_eq!(r.singular_reps, 0);
}

#[test]
fn same_seed_same_report() {
    let spec = gaussian_spec(2, 1.0);
    let a = quantile_risk_mc(&spec, &Estimator::Ols, 20, 0.1, 300, &RngStream::new(7, 0)).unwrap();
    let b = quantile_risk_mc(&spec, &Estimator::Ols, 20, 0.1, 300, &RngStream::new(7, 0)).unwrap();
    assert_eq!(a.quantile_risk, b.quantile_risk);
    assert_eq!(a.excess.sorted(), b.excess.sorted());
}

#[test]
fn constant_input_ols_matches_chi_square() {
    let spec = ProblemSpec::new(InputDist::constant_one(), vec![2.0], NoiseModel::gaussian(1.0).unwrap(), ErrorFn::Square).unwrap();
    let r = quantile_risk_mc(&spec, &Estimator::Ols, 100, 0.5, 20_000, &RngStream::new(3, 0)).unwrap();
    let want = chi_square_quantile(0.5, 1.0).unwrap() / 200.0;
    assert!((r.quantile_risk.value - want).abs() <= 3.0 * r.quantile_risk.se_proxy, "{:?} {want}", r.quantile_risk);
}

#[test]
fn risk_is_monotone_in_level() {
    let r = quantile_risk_mc(&gaussian_spec(2, 1.0), &Estimator::Ols, 15, 0.1, 1000, &RngStream::new(4, 0)).unwrap();
    let mut last = 0.0;
    for delta in [0.5, 0.3, 0.1, 0.05, 0.01] {
        let q = empirical_quantile(&r.excess, 1.0 - delta).unwrap().value;
        assert!(q >= last);
        last = q;
    }
}

#[test]
fn singular_designs_give_infinite_ols_risk() {
    let spec = ProblemSpec::new(InputDist::bernoulli(0.5).unwrap(), vec![1.0], NoiseModel::gaussian(1.0).unwrap(), ErrorFn::Square).unwrap();
    let r = quantile_risk_mc(&spec, &Estimator::Ols, 3, 0.05, 2000, &RngStream::new(5, 0)).unwrap();
    // P(all three inputs are zero) = 1/8 > 0.05
    assert!(r.quantile_risk.is_infinite());
    assert!(r.singular_reps > 150 && r.singular_reps < 350);
}

#[test]
fn ols_agrees_with_exact_minimax() {
    let (n, delta, reps) = (30, 0.1, 6000);
    let spec = gaussian_spec(2, 1.0);
    let ols = quantile_risk_mc(&spec, &Estimator::Ols, n, delta, reps, &RngStream::new(6, 0)).unwrap();
    let exact = gauss_minimax_exact_mc(&spec.input, ErrorFn::Square, 1.0, n, delta, reps, &RngStream::new(6, 1)).unwrap();
    let gap = (ols.quantile_risk.value - exact.value).abs();
    assert!(gap <= 3.0 * ols.quantile_risk.combined_se(&exact), "{:?} {exact:?}", ols.quantile_risk);
}

#[test]
fn minmax_risk_is_finite_and_reported() {
    let spec = gaussian_spec(2, 1.0);
    let config = MinMaxConfig::for_delta(0.1, 64).unwrap();
    let r = quantile_risk_mc(&spec, &Estimator::MinMax(config), 64, 0.1, 100, &RngStream::new(8, 0)).unwrap();
    assert!(r.quantile_risk.value.is_finite() && r.quantile_risk.value > 0.0);
    assert!(r.estimator.starts_with("minmax"));
    let wrong_n = MinMaxConfig::for_delta(0.1, 80).unwrap();
    assert!(quantile_risk_mc(&spec, &Estimator::MinMax(wrong_n), 64, 0.1, 100, &RngStream::new(8, 0)).is_err());
}
