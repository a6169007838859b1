//! Order-statistic size calibration and the associated sample-size calculators.
//!
//! The calibrated rank is `i* = min{r : P(Bin(n2, 1 - eps) <= r - 1) >= 1 - delta}`; the
//! size of a prediction set is the `i*`-th smallest transformed Phase-2 value.
//! Binomial probabilities are evaluated term by term in log space.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::model::check_probability;

/// Absolute slack applied when comparing a computed probability with its target, so that
/// boundary cases such as `1 - 0.5^1 >= 0.5` are not lost to round-off.
pub const PROB_SLACK: f64 = 1e-12;

/// Result of calibrating a size on Phase-2 transform values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibResult {
    /// 1-based rank of the order statistic used as the size.
    pub i_star: usize,
    /// Calibrated size.
    pub s: f64,
    pub n2: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Set when the transform values contain duplicates.
    pub tie_warning: bool,
}

/// `ln C(n, k)`.
pub(crate) fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `P(Bin(n, p) = k)` evaluated through logarithms.
pub(crate) fn binom_pmf(n: u64, k: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()).exp()
}

/// Compensated running sum.
#[derive(Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `P(Bin(n, p) <= k)`, summing whichever tail lies away from the mean so that the
/// large central terms never dominate the rounding error.
pub(crate) fn binom_cdf(n: u64, k: u64, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    let mut acc = KahanSum::default();
    if (k as f64) < n as f64 * p {
        for j in 0..=k {
            acc.add(binom_pmf(n, j, p));
        }
        acc.value().min(1.0)
    } else {
        for j in k + 1..=n {
            acc.add(binom_pmf(n, j, p));
        }
        (1.0 - acc.value()).max(0.0)
    }
}

fn check_inputs(n2: usize, epsilon: f64, delta: f64) -> Result<()> {
    check_probability("epsilon", epsilon)?;
    check_probability("delta", delta)?;
    if n2 == 0 {
        return invalid("n2 must be at least 1");
    }
    Ok(())
}

/// Smallest Phase-2 size `n2` with `1 - (1 - eps)^n2 >= 1 - delta`.
pub fn min_phase2_size(epsilon: f64, delta: f64) -> Result<usize> {
    check_probability("epsilon", epsilon)?;
    check_probability("delta", delta)?;
    let log_q = (-epsilon).ln_1p();
    let fails = |n: f64| (n * log_q).exp() > delta + PROB_SLACK;
    let mut n = (delta.ln() / log_q).ceil().max(1.0);
    while n > 1.0 && !fails(n - 1.0) {
        n -= 1.0;
    }
    while fails(n) {
        n += 1.0;
    }
    Ok(n as usize)
}

/// Rank `i*` of the order statistic that upper-bounds the `(1 - eps)`-quantile with
/// confidence `1 - delta`.
pub fn calib_index_upper(n2: usize, epsilon: f64, delta: f64) -> Result<usize> {
    check_inputs(n2, epsilon, delta)?;
    let required = min_phase2_size(epsilon, delta)?;
    if n2 < required {
        return Err(Error::InfeasibleCalibration { n2, required });
    }
    let target = 1.0 - delta - PROB_SLACK;
    let p = 1.0 - epsilon;
    let mut cdf = KahanSum::default();
    for r in 1..=n2 {
        cdf.add(binom_pmf(n2 as u64, (r - 1) as u64, p));
        if cdf.value() >= target {
            return Ok(r);
        }
    }
    Err(Error::InfeasibleCalibration { n2, required })
}

/// Rank `i_*` of the order statistic that lower-bounds the `(1 - eps)`-quantile with
/// confidence `1 - delta`.
pub fn calib_index_lower(n2: usize, epsilon: f64, delta: f64) -> Result<usize> {
    check_inputs(n2, epsilon, delta)?;
    let log_eps = epsilon.ln();
    let required = (delta.ln() / log_eps).ceil().max(1.0) as usize;
    if (n2 as f64 * log_eps).exp() > delta + PROB_SLACK {
        return Err(Error::InfeasibleCalibration { n2, required });
    }
    let target = 1.0 - delta - PROB_SLACK;
    let p = 1.0 - epsilon;
    let mut tail = KahanSum::default();
    for r in (1..=n2).rev() {
        tail.add(binom_pmf(n2 as u64, r as u64, p));
        if tail.value() >= target {
            return Ok(r);
        }
    }
    Err(Error::InfeasibleCalibration { n2, required })
}

/// Calibrates a size from Phase-2 transform values: the `i*`-th smallest value.
pub fn calibrate_size(t_values: &[f64], epsilon: f64, delta: f64) -> Result<CalibResult> {
    if t_values.iter().any(|v| !v.is_finite()) {
        return invalid("transform values must be finite");
    }
    let n2 = t_values.len();
    let i_star = calib_index_upper(n2, epsilon, delta)?;
    let mut sorted = t_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tie_warning = sorted.windows(2).any(|w| w[0] == w[1]);
    Ok(CalibResult {
        i_star,
        s: sorted[i_star - 1],
        n2,
        epsilon,
        delta,
        tie_warning,
    })
}

/// `1 - delta_theoretical = P(Bin(n2, 1 - eps) <= i* - 1)`, the confidence actually attained
/// by the calibrated rank.
pub fn theoretical_confidence(n2: usize, epsilon: f64, delta: f64) -> Result<f64> {
    let i_star = calib_index_upper(n2, epsilon, delta)?;
    Ok(binom_cdf(n2 as u64, (i_star - 1) as u64, 1.0 - epsilon))
}

/// `(n2, 1 - delta_theoretical)` for every `n2` in the inclusive range.
pub fn theoretical_confidence_curve(
    n_min: usize,
    n_max: usize,
    epsilon: f64,
    delta: f64,
) -> Result<Vec<(usize, f64)>> {
    (n_min..=n_max)
        .map(|n| theoretical_confidence(n, epsilon, delta).map(|c| (n, c)))
        .collect()
}

/// Sample sizes at which `delta_theoretical` has a local maximum along a curve produced by
/// [`theoretical_confidence_curve`]: strictly above its left neighbour (or first) and not
/// below its right neighbour (or last).
pub fn delta_local_maxima(curve: &[(usize, f64)]) -> Vec<usize> {
    let deltas: Vec<f64> = curve.iter().map(|(_, c)| 1.0 - c).collect();
    (0..deltas.len())
        .filter(|&i| {
            let left = i == 0 || deltas[i] > deltas[i - 1];
            let right = i + 1 == deltas.len() || deltas[i] >= deltas[i + 1];
            left && right
        })
        .map(|i| curve[i].0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_size_table_values() {
        assert_eq!(min_phase2_size(0.05, 0.05).unwrap(), 59);
        assert_eq!(min_phase2_size(0.05, 0.2).unwrap(), 32);
        assert_eq!(min_phase2_size(0.5, 0.5).unwrap(), 1);
    }

    #[test]
    fn upper_index_values() {
        assert_eq!(calib_index_upper(59, 0.05, 0.05).unwrap(), 59);
        assert_eq!(calib_index_upper(100, 0.05, 0.05).unwrap(), 99);
        assert_eq!(calib_index_upper(1, 0.5, 0.5).unwrap(), 1);
        assert_eq!(calib_index_upper(500, 0.05, 0.05).unwrap(), 484);
    }

    #[test]
    fn upper_index_below_minimum_reports_requirement() {
        match calib_index_upper(58, 0.05, 0.05) {
            Err(Error::InfeasibleCalibration { n2, required }) => {
                assert_eq!((n2, required), (58, 59));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn upper_index_with_large_delta_scans_below_mean() {
        // P(Bin(10, .5) <= 2) = 0.0547 < 0.1 <= P(Bin(10, .5) <= 3) = 0.1719
        assert_eq!(calib_index_upper(10, 0.5, 0.9).unwrap(), 4);
    }

    #[test]
    fn lower_index_values() {
        assert_eq!(calib_index_lower(1, 0.5, 0.5).unwrap(), 1);
        assert_eq!(calib_index_lower(59, 0.05, 0.05).unwrap(), 53);
        assert_eq!(calib_index_lower(100, 0.05, 0.05).unwrap(), 91);
        assert_eq!(calib_index_lower(500, 0.05, 0.05).unwrap(), 467);
        assert!(matches!(
            calib_index_lower(2, 0.5, 0.05),
            Err(Error::InfeasibleCalibration { .. })
        ));
    }

    #[test]
    fn calibrate_takes_max_at_minimum_size() {
        let values: Vec<f64> = (1..=59).rev().map(f64::from).collect();
        let c = calibrate_size(&values, 0.05, 0.05).unwrap();
        assert_eq!(c.i_star, 59);
        assert_eq!(c.s, 59.0);
        assert!(!c.tie_warning);
    }

    #[test]
    fn calibrate_single_value() {
        let c = calibrate_size(&[3.2], 0.5, 0.5).unwrap();
        assert_eq!((c.i_star, c.s), (1, 3.2));
    }

    #[test]
    fn calibrate_flags_ties() {
        let mut values: Vec<f64> = (1..=59).map(f64::from).collect();
        values[3] = values[4];
        let c = calibrate_size(&values, 0.05, 0.05).unwrap();
        assert!(c.tie_warning);
        assert_eq!(c.s, 59.0);
    }

    #[test]
    fn theoretical_confidence_values() {
        let c = theoretical_confidence(59, 0.05, 0.05).unwrap();
        assert!((c - 0.951_505_474_750_576_8).abs() < 1e-13);
        let c = theoretical_confidence(100, 0.05, 0.05).unwrap();
        assert!((c - 0.962_918_790_672_644_8).abs() < 1e-13, "{c:.18}");
        assert!((theoretical_confidence(1, 0.5, 0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn index_sequence_matches_oracle() {
        for (n, i) in [
            (59, 59),
            (60, 60),
            (92, 92),
            (93, 92),
            (94, 93),
            (124, 122),
            (153, 150),
            (181, 177),
        ] {
            assert_eq!(calib_index_upper(n, 0.05, 0.05).unwrap(), i, "n2 = {n}");
        }
    }

    #[test]
    fn large_n_is_stable() {
        let i = calib_index_upper(1_000_000, 0.05, 0.05).unwrap();
        // normal approximation: 950000 + 1.645 * sqrt(47500) ~ 950358
        assert!((950_300..950_420).contains(&i), "i* = {i}");
    }
}
