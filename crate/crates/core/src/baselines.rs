//! Comparison methods: scenario generation with its sample-size bounds, and safe convex
//! approximations of a single linear chance constraint under a perturbation model.

use serde::{Deserialize, Serialize};

use crate::calibrate::{binom_cdf, ln_choose};
use crate::conic::{solve, Affine, ConicProgram, ProgramBuilder, Solution, SolverSettings};
use crate::error::{invalid, Error, Result};
use crate::model::{check_probability, CcpSpec, ConstraintFamily, Dataset};

/// `C(k + d - 1, k) P(Bin(n, eps) <= k + d - 1)`, the scenario violation bound.
fn scenario_bound(n: u64, epsilon: f64, d: u64, k: u64) -> f64 {
    let top = k + d - 1;
    if n <= top {
        return ln_choose(top, k).exp();
    }
    (ln_choose(top, k) + binom_cdf(n, top, epsilon).ln()).exp()
}

fn smallest_n(epsilon: f64, delta: f64, d: usize, k: usize) -> Result<usize> {
    check_probability("epsilon", epsilon)?;
    check_probability("delta", delta)?;
    if d == 0 {
        return invalid("decision dimension must be at least 1");
    }
    let (d, k) = (d as u64, k as u64);
    let ok = |n: u64| scenario_bound(n, epsilon, d, k) <= delta;
    let mut lo = k + d - 1; // bound is >= 1 here
    let mut hi = (lo + 1).max(2);
    while !ok(hi) {
        lo = hi;
        hi = hi
            .checked_mul(2)
            .ok_or_else(|| Error::InvalidArgument("sample size overflow".into()))?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi as usize)
}

/// Smallest scenario count `n` with `sum_{i<d} C(n, i) eps^i (1 - eps)^(n - i) <= delta`.
pub fn sg_min_size(epsilon: f64, delta: f64, d: usize) -> Result<usize> {
    smallest_n(epsilon, delta, d, 0)
}

/// Smallest `n` with `C(k + d - 1, k) sum_{i < k + d} C(n, i) eps^i (1 - eps)^(n - i) <= delta`
/// when `k` scenarios may be discarded.
pub fn sg_min_size_discard(epsilon: f64, delta: f64, d: usize, k_discard: usize) -> Result<usize> {
    smallest_n(epsilon, delta, d, k_discard)
}

/// Value of the scenario bound at `n` (exposed for minimality checks).
pub fn sg_violation_bound(n: usize, epsilon: f64, d: usize, k_discard: usize) -> f64 {
    scenario_bound(n as u64, epsilon, d as u64, k_discard as u64)
}

/// `(epsilon, delta)` pairs of the standard sample-size comparison grid.
pub const SAMPLE_SIZE_GRID: [(f64, f64); 12] = [
    (0.05, 0.2),
    (0.05, 0.1),
    (0.05, 0.05),
    (0.05, 0.01),
    (0.05, 0.005),
    (0.05, 0.001),
    (0.05, 1e-5),
    (0.2, 0.05),
    (0.1, 0.05),
    (0.05, 0.05),
    (0.01, 0.05),
    (0.001, 0.05),
];

/// Decision dimensions compared in the sample-size grid.
pub const SAMPLE_SIZE_DIMS: [usize; 4] = [5, 11, 50, 100];

/// Minimum sample sizes for one `(epsilon, delta)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeRow {
    pub epsilon: f64,
    pub delta: f64,
    /// Phase-2 size needed by the calibrated prediction set (independent of `d`).
    pub ro: usize,
    /// Scenario counts for each entry of [`SAMPLE_SIZE_DIMS`].
    pub sg: Vec<usize>,
}

/// Sample-size comparison over `grid` and `dims`.
pub fn sample_size_table(grid: &[(f64, f64)], dims: &[usize]) -> Result<Vec<SampleSizeRow>> {
    grid.iter()
        .map(|&(epsilon, delta)| {
            Ok(SampleSizeRow {
                epsilon,
                delta,
                ro: crate::calibrate::min_phase2_size(epsilon, delta)?,
                sg: dims
                    .iter()
                    .map(|&d| sg_min_size(epsilon, delta, d))
                    .collect::<Result<_>>()?,
            })
        })
        .collect()
}

fn base_builder(spec: &CcpSpec) -> (ProgramBuilder, Vec<usize>) {
    let mut b = ProgramBuilder::new();
    let x = b.new_vars(spec.d());
    for (j, &c) in spec.objective.iter().enumerate() {
        b.set_cost(x[j], c);
    }
    for dc in &spec.det_constraints {
        let lhs = Affine::from_terms(
            0.0,
            x.iter().zip(&dc.coeffs).map(|(&v, &c)| (v, c)).collect(),
        );
        b.add_le(&lhs, &Affine::constant(dc.rhs));
    }
    (b, x)
}

/// Linear program imposing the uncertain constraint at every scenario.
pub fn sg_program(spec: &CcpSpec, scenarios: &Dataset) -> Result<ConicProgram> {
    spec.validate()?;
    if !spec.family.is_linear() {
        return Err(Error::UnsupportedCombination {
            family: spec.family.name().into(),
            shape: "scenarios".into(),
            supported: "scenario generation supports the linear families".into(),
        });
    }
    if !scenarios.is_empty() && scenarios.m() != spec.data_dim() {
        return invalid("scenario dimension does not match the specification");
    }
    let d = spec.d();
    let (mut b, x) = base_builder(spec);
    for xi in scenarios.rows() {
        for (j, &rhs) in spec.rhs.iter().enumerate() {
            let row = &xi[j * d..(j + 1) * d];
            let lhs = Affine::from_terms(0.0, x.iter().zip(row).map(|(&v, &c)| (v, c)).collect());
            b.add_le(&lhs, &Affine::constant(rhs));
        }
    }
    Ok(b.build())
}

/// Solves the scenario program; infeasible and unbounded outcomes are reported in the status.
pub fn sg_solve(spec: &CcpSpec, scenarios: &Dataset) -> Result<Solution> {
    solve(&sg_program(spec, scenarios)?, &SolverSettings::default())
}

/// `xi = a0 + sum_i zeta_i a_i` with independent scalar perturbations `zeta_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationModel {
    pub a0: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
}

impl PerturbationModel {
    fn check(&self, d: usize) -> Result<()> {
        if self.a0.len() != d || self.directions.iter().any(|a| a.len() != d) {
            return invalid("perturbation vectors must have the decision dimension");
        }
        if self.directions.is_empty() {
            return invalid("perturbation model needs at least one direction");
        }
        Ok(())
    }

    /// The realization for perturbation values `zeta`.
    pub fn realize(&self, zeta: &[f64]) -> Vec<f64> {
        let mut xi = self.a0.clone();
        for (z, a) in zeta.iter().zip(&self.directions) {
            for (v, ai) in xi.iter_mut().zip(a) {
                *v += z * ai;
            }
        }
        xi
    }
}

/// Interval and variance bounds for independent Gaussian perturbations:
/// `mean_i in [mu_minus_i, mu_plus_i]`, `var_i <= sigma_i^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBounds {
    pub mu_minus: Vec<f64>,
    pub mu_plus: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// `sqrt(2 log(1 / eps))`.
pub fn hoeffding_eta(epsilon: f64) -> f64 {
    (2.0 * (1.0 / epsilon).ln()).sqrt()
}

fn single_linear(spec: &CcpSpec) -> Result<f64> {
    spec.validate()?;
    match spec.family {
        ConstraintFamily::SingleLinear => Ok(spec.rhs[0]),
        _ => Err(Error::UnsupportedCombination {
            family: spec.family.name().into(),
            shape: "perturbation model".into(),
            supported: "safe approximations support the single linear family".into(),
        }),
    }
}

fn along(x: &[usize], a: &[f64], scale: f64) -> Affine {
    Affine::from_terms(
        0.0,
        x.iter().zip(a).map(|(&v, &c)| (v, scale * c)).collect(),
    )
}

/// `eta ||(a_i' x)_i|| <= b - a0' x` with `eta = sqrt(2 log(1/eps))`, valid for independent
/// zero-mean perturbations supported in `[-1, 1]`.
pub fn safe_hoeffding(spec: &CcpSpec, model: &PerturbationModel) -> Result<ConicProgram> {
    let rhs = single_linear(spec)?;
    model.check(spec.d())?;
    let eta = hoeffding_eta(spec.epsilon);
    let (mut b, x) = base_builder(spec);
    let mut head = Affine::constant(rhs);
    head.add_scaled(&along(&x, &model.a0, 1.0), -1.0);
    let mut block = vec![head];
    block.extend(model.directions.iter().map(|a| along(&x, a, eta)));
    b.add_soc(block);
    Ok(b.build())
}

/// `a0'x - b + sum_i max(mu-_i a_i'x, mu+_i a_i'x) + eta sqrt(sum_i sigma_i^2 (a_i'x)^2) <= 0`
/// for independent Gaussian perturbations with the given bounds.
pub fn safe_gaussian(
    spec: &CcpSpec,
    model: &PerturbationModel,
    bounds: &GaussianBounds,
) -> Result<ConicProgram> {
    let rhs = single_linear(spec)?;
    model.check(spec.d())?;
    let l = model.directions.len();
    if bounds.mu_minus.len() != l || bounds.mu_plus.len() != l || bounds.sigma.len() != l {
        return invalid("bounds must have one entry per perturbation");
    }
    if bounds
        .mu_minus
        .iter()
        .zip(&bounds.mu_plus)
        .any(|(a, b)| a > b)
    {
        return invalid("mu_minus must not exceed mu_plus");
    }
    if bounds.sigma.iter().any(|s| !(*s >= 0.0)) {
        return invalid("sigma must be nonnegative");
    }
    let eta = hoeffding_eta(spec.epsilon);
    let (mut b, x) = base_builder(spec);
    let mut lhs = along(&x, &model.a0, 1.0);
    for (i, a) in model.directions.iter().enumerate() {
        let w = b.new_var();
        for mu in [bounds.mu_minus[i], bounds.mu_plus[i]] {
            b.add_le(&along(&x, a, mu), &Affine::var(w));
        }
        lhs.add_term(w, 1.0);
    }
    if bounds.sigma.iter().any(|&s| s > 0.0) {
        let t = b.new_var();
        let mut block = vec![Affine::var(t)];
        for (a, &s) in model.directions.iter().zip(&bounds.sigma) {
            if s > 0.0 {
                block.push(along(&x, a, s));
            }
        }
        b.add_soc(block);
        lhs.add_term(t, eta);
    }
    b.add_le(&lhs, &Affine::constant(rhs));
    Ok(b.build())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_sizes() {
        assert_eq!(sg_min_size(0.05, 0.05, 5).unwrap(), 181);
        assert_eq!(sg_min_size(0.05, 0.05, 100).unwrap(), 2331);
        assert_eq!(sg_min_size(0.001, 0.05, 50).unwrap(), 62165);
        assert_eq!(sg_min_size_discard(0.05, 0.05, 5, 0).unwrap(), 181);
        assert_eq!(sg_min_size_discard(0.05, 0.05, 5, 10).unwrap(), 689);
    }

    #[test]
    fn eta_closed_form() {
        assert!((hoeffding_eta((-2.0f64).exp()) - 2.0).abs() < 1e-15);
    }
}
