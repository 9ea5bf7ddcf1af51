mod common;

use common::{random_disturbance, random_psd, rng};
use mflqr_core::disturbance::DiscreteDisturbance;
use mflqr_core::stats::RunningStats;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn central_moments_ignore_translation(seed in any::<u64>(), shift in prop::collection::vec(-5.0f64..5.0, 3)) {
        let mut r = rng(seed);
        let n = 1 + (seed % 3) as usize;
        let d = random_disturbance(&mut r, n);
        let q = random_psd(&mut r, n);
        let c = DVector::from_column_slice(&shift[..n]);
        let moved = d.map_support(|w| w + &c).unwrap();
        prop_assert!(((moved.mean() - d.mean()) - &c).abs().max() <= 1e-12);
        prop_assert!((moved.covariance() - d.covariance()).abs().max() <= 1e-10);
        prop_assert!((moved.gamma(&q).unwrap() - d.gamma(&q).unwrap()).abs().max() <= 1e-9);
        prop_assert!(close(moved.delta(&q).unwrap(), d.delta(&q).unwrap(), 1e-9));
    }

    #[test]
    fn central_moments_scale_homogeneously(seed in any::<u64>(), s in -3.0f64..3.0) {
        let mut r = rng(seed);
        let n = 1 + (seed % 3) as usize;
        let d = random_disturbance(&mut r, n);
        let q = random_psd(&mut r, n);
        let scaled = d.map_support(|w| w * s).unwrap();
        prop_assert!((scaled.covariance() - d.covariance() * s.powi(2)).abs().max() <= 1e-10);
        prop_assert!((scaled.gamma(&q).unwrap() - d.gamma(&q).unwrap() * s.powi(3)).abs().max() <= 1e-9);
        prop_assert!(close(scaled.delta(&q).unwrap(), d.delta(&q).unwrap() * s.powi(4), 1e-9));
        // γ is linear and δ quadratic in the weight
        prop_assert!((d.gamma(&(q.clone() * s)).unwrap() - d.gamma(&q).unwrap() * s).abs().max() <= 1e-10);
        prop_assert!(close(d.delta(&(q.clone() * s)).unwrap(), d.delta(&q).unwrap() * s * s, 1e-10));
    }

    #[test]
    fn symmetric_noise_has_no_skew(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = 1 + (seed % 3) as usize;
        let half = random_disturbance(&mut r, n);
        let q = random_psd(&mut r, n);
        let mut support: Vec<DVector<f64>> = half.support().to_vec();
        support.extend(half.support().iter().map(|w| -w));
        let probs: Vec<f64> = half.probs().iter().chain(half.probs()).map(|p| p / 2.0).collect();
        let sym = DiscreteDisturbance::new(support, probs).unwrap();
        prop_assert!(sym.mean().abs().max() <= 1e-12);
        prop_assert!(sym.gamma(&q).unwrap().abs().max() <= 1e-10);
    }

    #[test]
    fn delta_and_ell_are_consistent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = 1 + (seed % 3) as usize;
        let d = random_disturbance(&mut r, n);
        let q = random_psd(&mut r, n);
        let mom = d.moments(&q).unwrap();
        prop_assert!(mom.delta >= -1e-12);
        let sq = &mom.sigma * &q;
        prop_assert!(close(mom.ell(&q), mom.delta - 4.0 * (&sq * &sq).trace(), 1e-12));
        prop_assert!(close(mom.trace_sigma_q(&q), sq.trace(), 1e-12));
    }
}

/// Empirical moments from 2·10⁵ draws agree with the exact sums within 5 standard errors.
#[test]
fn sampling_matches_exact_moments() {
    let mut r = rng(99);
    let d = DiscreteDisturbance::new(
        vec![
            DVector::from_vec(vec![1.0, -0.5]),
            DVector::from_vec(vec![-2.0, 0.5]),
            DVector::from_vec(vec![0.5, 2.0]),
        ],
        vec![0.5, 0.2, 0.3],
    )
    .unwrap();
    let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
    let mom = d.moments(&q).unwrap();
    let tr = mom.trace_sigma_q(&q);

    let mut first = RunningStats::new();
    let mut quad = RunningStats::new();
    let mut skew = RunningStats::new();
    let mut var = RunningStats::new();
    for _ in 0..200_000 {
        let w = d.sample(&mut r);
        let c = &w - &mom.mu;
        let form = (c.transpose() * &q * &c)[(0, 0)];
        first.push(w[0]);
        quad.push(c[0] * c[1]);
        skew.push(c[0] * form);
        var.push((form - tr).powi(2));
    }
    let within = |s: &RunningStats, exact: f64| (s.mean() - exact).abs() <= 5.0 * s.std_error();
    assert!(within(&first, mom.mu[0]));
    assert!(within(&quad, mom.sigma[(0, 1)]));
    assert!(within(&skew, mom.gamma[0]));
    assert!(within(&var, mom.delta));
}

#[test]
fn shifted_bernoulli_reference_values() {
    let d = DiscreteDisturbance::shifted_bernoulli(10.0, 0.25).unwrap();
    let q = DMatrix::from_element(1, 1, 0.8);
    let mom = d.moments(&q).unwrap();
    assert!(mom.mu[0].abs() < 1e-12);
    assert!((mom.sigma[(0, 0)] - 18.75).abs() < 1e-12);
    assert!((mom.gamma[0] - 75.0).abs() < 1e-10);
    assert!((mom.delta - 300.0).abs() < 1e-9);
    assert!((mom.trace_sigma_q(&q) - 15.0).abs() < 1e-12);
    assert!((mom.ell(&q) + 600.0).abs() < 1e-9);
}

#[test]
fn invalid_distributions_are_rejected() {
    let one = DVector::from_element(1, 1.0);
    assert!(DiscreteDisturbance::new(vec![one.clone(), -&one], vec![0.5, 0.4]).is_err());
    assert!(DiscreteDisturbance::new(vec![one.clone(), -&one], vec![1.5, -0.5]).is_err());
    assert!(DiscreteDisturbance::new(vec![one.clone()], vec![0.5, 0.5]).is_err());
    assert!(DiscreteDisturbance::new(vec![], vec![]).is_err());
    assert!(
        DiscreteDisturbance::new(vec![one.clone(), DVector::zeros(2)], vec![0.5, 0.5]).is_err()
    );
}
