//! Order-statistic calibration checked against statrs' binomial and beta distributions.

mod common;

use common::*;
use lbro_core::calibrate::{
    calib_index_lower, calib_index_upper, calibrate_size, min_phase2_size, theoretical_confidence,
};
use lbro_core::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{Beta, Binomial, ContinuousCDF, DiscreteCDF};

/// `min{r : P(Bin(n2, 1 - eps) <= r - 1) >= 1 - delta}` by direct scan of statrs' CDF.
fn oracle_upper(n2: usize, eps: f64, delta: f64) -> Option<usize> {
    let bin = Binomial::new(1.0 - eps, n2 as u64).unwrap();
    (1..=n2).find(|&r| bin.cdf((r - 1) as u64) >= 1.0 - delta)
}

/// `max{r : P(Bin(n2, 1 - eps) >= r) >= 1 - delta}`.
fn oracle_lower(n2: usize, eps: f64, delta: f64) -> Option<usize> {
    let bin = Binomial::new(1.0 - eps, n2 as u64).unwrap();
    (1..=n2)
        .rev()
        .find(|&r| bin.sf((r - 1) as u64) >= 1.0 - delta)
}

#[test]
fn rank_examples() {
    assert_eq!(calib_index_upper(59, 0.05, 0.05).unwrap(), 59);
    assert_eq!(calib_index_upper(100, 0.05, 0.05).unwrap(), 99);
    assert_eq!(calib_index_upper(1, 0.5, 0.5).unwrap(), 1);
    assert_eq!(min_phase2_size(0.05, 0.05).unwrap(), 59);
    assert_eq!(min_phase2_size(0.05, 0.2).unwrap(), 32);
    assert_eq!(min_phase2_size(0.5, 0.5).unwrap(), 1);
    assert_eq!(calib_index_lower(1, 0.5, 0.5).unwrap(), 1);
    assert_eq!(
        calib_index_lower(59, 0.05, 0.05).unwrap(),
        oracle_lower(59, 0.05, 0.05).unwrap()
    );
    assert!(matches!(
        calib_index_lower(2, 0.5, 0.05),
        Err(Error::InfeasibleCalibration { .. })
    ));
    assert!(matches!(
        calib_index_upper(58, 0.05, 0.05),
        Err(Error::InfeasibleCalibration {
            n2: 58,
            required: 59
        })
    ));
}

#[test]
fn lower_rank_at_fifty_nine_is_frozen() {
    // value of the statrs scan, frozen
    assert_eq!(calib_index_lower(59, 0.05, 0.05).unwrap(), 53);
}

#[test]
fn confidence_examples() {
    let c = theoretical_confidence(59, 0.05, 0.05).unwrap();
    assert!((c - (1.0 - 0.95f64.powi(59))).abs() < 1e-13);
    assert!((c - 0.9515).abs() < 1e-4);
    assert_eq!(theoretical_confidence(1, 0.5, 0.5).unwrap(), 0.5);
}

#[test]
fn calibrate_examples() {
    let mut values: Vec<f64> = (1..=59).map(f64::from).collect();
    values.shuffle(&mut rng_from_seed(3));
    let r = calibrate_size(&values, 0.05, 0.05).unwrap();
    assert_eq!((r.i_star, r.s, r.tie_warning), (59, 59.0, false));

    let r = calibrate_size(&[3.2], 0.5, 0.5).unwrap();
    assert_eq!((r.i_star, r.s), (1, 3.2));

    let mut dup: Vec<f64> = (1..=59).map(|v| f64::from(v / 2)).collect();
    dup.reverse();
    let r = calibrate_size(&dup, 0.05, 0.05).unwrap();
    assert!(r.tie_warning);
    assert_eq!(r.s, 29.0);

    assert!(calibrate_size(&[1.0; 58], 0.05, 0.05).is_err());
    let mut bad = values.clone();
    bad[0] = f64::NAN;
    assert!(calibrate_size(&bad, 0.05, 0.05).is_err());
}

#[test]
fn beta_binomial_identity() {
    for n2 in [59usize, 100, 500] {
        for (eps, delta) in [(0.05, 0.05), (0.1, 0.01), (0.2, 0.2)] {
            let i = calib_index_upper(n2, eps, delta).unwrap();
            let beta = Beta::new(i as f64, (n2 - i + 1) as f64).unwrap();
            let lhs = beta.sf(1.0 - eps);
            let rhs = theoretical_confidence(n2, eps, delta).unwrap();
            assert!((lhs - rhs).abs() < 1e-10, "n2={n2}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn minimum_size_is_the_first_that_calibrates() {
    let eps_grid = [0.001, 0.01, 0.03, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9];
    let delta_grid = [0.001, 0.01, 0.05, 0.1, 0.2, 0.5, 0.9];
    for &eps in &eps_grid {
        for &delta in &delta_grid {
            let n = min_phase2_size(eps, delta).unwrap();
            assert!(calib_index_upper(n, eps, delta).is_ok(), "{eps} {delta}");
            if n > 1 {
                assert!(
                    calib_index_upper(n - 1, eps, delta).is_err(),
                    "{eps} {delta}"
                );
            }
            // log-form closed expression, away from exact integer boundaries
            let closed = (delta.ln() / (1.0 - eps).ln()).ceil() as usize;
            assert!(n.abs_diff(closed.max(1)) <= 1);
        }
    }
}

#[test]
fn uniform_coverage_meets_the_confidence() {
    let (n2, eps, delta) = (100, 0.1, 0.1);
    let i = calib_index_upper(n2, eps, delta).unwrap();
    let target = theoretical_confidence(n2, eps, delta).unwrap();
    let draws = 10_000;
    let mut rng = rng_from_seed(17);
    let mut hits = 0usize;
    let mut y = vec![0.0; n2];
    for _ in 0..draws {
        y.iter_mut().for_each(|v| *v = rng.random::<f64>());
        y.sort_by(f64::total_cmp);
        if y[i - 1] >= 1.0 - eps {
            hits += 1;
        }
    }
    let freq = hits as f64 / draws as f64;
    let se = (target * (1.0 - target) / draws as f64).sqrt();
    assert!(freq >= 1.0 - delta - 3.0 * se, "{freq}");
    assert!((freq - target).abs() <= 3.0 * se, "{freq} vs {target}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn upper_rank_matches_the_binomial_scan(
        eps in 0.01f64..0.5,
        delta in 0.01f64..0.5,
        extra in 0usize..300,
    ) {
        let n2 = min_phase2_size(eps, delta).unwrap() + extra;
        prop_assert_eq!(calib_index_upper(n2, eps, delta).ok(), oracle_upper(n2, eps, delta));
    }

    #[test]
    fn lower_rank_matches_the_binomial_scan(
        eps in 0.05f64..0.5,
        delta in 0.01f64..0.5,
        n2 in 5usize..300,
    ) {
        prop_assert_eq!(calib_index_lower(n2, eps, delta).ok(), oracle_lower(n2, eps, delta));
    }

    #[test]
    fn attained_confidence_is_at_least_the_target(
        eps in 0.001f64..0.9,
        delta in 0.001f64..0.9,
        extra in 0usize..500,
    ) {
        let n2 = min_phase2_size(eps, delta).unwrap() + extra;
        let i = calib_index_upper(n2, eps, delta).unwrap();
        prop_assert!((1..=n2).contains(&i));
        prop_assert!(theoretical_confidence(n2, eps, delta).unwrap() >= 1.0 - delta - 1e-12);
    }

    #[test]
    fn calibration_ignores_the_order_of_values(
        values in prop::collection::vec(-1e3f64..1e3, 59..150),
        seed in any::<u64>(),
    ) {
        let a = calibrate_size(&values, 0.05, 0.05).unwrap();
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut rng_from_seed(seed));
        let b = calibrate_size(&shuffled, 0.05, 0.05).unwrap();
        prop_assert_eq!(&a, &b);
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert_eq!(a.s, sorted[a.i_star - 1]);
    }
}
