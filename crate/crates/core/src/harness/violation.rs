//! Violation probabilities of a fixed decision.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use super::sampler::{PerturbationLaw, Sampler};
use crate::error::{invalid, Result};
use crate::model::{dot, rng_from_seed, CcpSpec, ConstraintFamily};

const CHUNK: usize = 1000;

fn normal_tail(mean: f64, var: f64, b: f64) -> f64 {
    if !(var > 0.0) {
        return if mean <= b { 0.0 } else { 1.0 };
    }
    Normal::standard().sf((b - mean) / var.sqrt())
}

/// `P(xi' x > b)` for `xi ~ N(mu, sigma)`. A decision with `x' sigma x = 0` is treated as a
/// deterministic constraint.
pub fn gaussian_violation(x: &[f64], mu: &[f64], sigma: &DMatrix<f64>, b: f64) -> Result<f64> {
    let d = x.len();
    if mu.len() != d || sigma.nrows() != d || sigma.ncols() != d {
        return invalid("dimensions of x, mu and sigma differ");
    }
    let xv = DVector::from_column_slice(x);
    let var = xv.dot(&(sigma * &xv));
    Ok(normal_tail(dot(mu, x), var, b))
}

/// Closed-form violation probability when the family is a single linear row and the
/// uncertain vector is Gaussian, a Gaussian mixture, or a Gaussian perturbation model.
pub fn exact_violation(sampler: &Sampler, spec: &CcpSpec, x: &[f64]) -> Option<Result<f64>> {
    if spec.family != ConstraintFamily::SingleLinear {
        return None;
    }
    let b = spec.rhs[0];
    let gaussian = |mean: &[f64], cov: &[Vec<f64>]| {
        let m = mean.len();
        gaussian_violation(x, mean, &DMatrix::from_fn(m, m, |i, j| cov[i][j]), b)
    };
    match sampler {
        Sampler::Gaussian(c) => Some(gaussian(&c.mean, &c.covariance)),
        Sampler::Mixture {
            weights,
            components,
        } => {
            let total: f64 = weights.iter().sum();
            let mut acc = 0.0;
            for (w, c) in weights.iter().zip(components) {
                match gaussian(&c.mean, &c.covariance) {
                    Ok(p) => acc += w * p,
                    Err(e) => return Some(Err(e)),
                }
            }
            Some(Ok(acc / total))
        }
        Sampler::Perturbation {
            a0,
            directions,
            law: PerturbationLaw::StandardNormal,
        } => {
            let var = directions.iter().map(|a| dot(a, x).powi(2)).sum();
            Some(Ok(normal_tail(dot(a0, x), var, b)))
        }
        _ => None,
    }
}

/// Fraction of `n_eval` fresh draws that violate the uncertain constraint at `x`; for joint
/// families a draw violating any row counts.
pub fn mc_violation(
    x: &[f64],
    sampler: &Sampler,
    seed: u64,
    spec: &CcpSpec,
    n_eval: usize,
) -> Result<f64> {
    if n_eval == 0 {
        return invalid("n_eval must be at least 1");
    }
    if sampler.dim() != spec.data_dim() || x.len() != spec.d() {
        return invalid("sampler, specification and decision dimensions disagree");
    }
    let mut rng = rng_from_seed(seed);
    let mut violated = 0usize;
    let mut left = n_eval;
    while left > 0 {
        let take = left.min(CHUNK);
        let data = sampler.sample(take, &mut rng)?;
        violated += data.rows().filter(|xi| spec.is_violated(x, xi)).count();
        left -= take;
    }
    Ok(violated as f64 / n_eval as f64)
}
