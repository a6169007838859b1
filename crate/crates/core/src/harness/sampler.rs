//! Data generators for the experiment families.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{quadratic_vector, sdp_vector, Dataset, SeededRng};

/// A Gaussian component given by its mean and covariance (rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

/// Law of the scalar perturbations in [`Sampler::Perturbation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum PerturbationLaw {
    /// `2 Beta(alpha, beta) - 1`, supported in `[-1, 1]`.
    ScaledBeta {
        alpha: f64,
        beta: f64,
    },
    StandardNormal,
}

/// Distribution of the uncertain vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    Gaussian(GaussianComponent),
    Mixture {
        weights: Vec<f64>,
        components: Vec<GaussianComponent>,
    },
    /// `a0 + sum_i zeta_i a_i` with independent `zeta_i` drawn from `law`.
    Perturbation {
        a0: Vec<f64>,
        directions: Vec<Vec<f64>>,
        #[serde(flatten)]
        law: PerturbationLaw,
    },
    /// `P z + w` with `z ~ N(latent)` and `w` uniform on `[-noise, noise]^m`; `projection`
    /// holds the `m` rows of `P`.
    LowRank {
        projection: Vec<Vec<f64>>,
        latent: GaussianComponent,
        noise: f64,
    },
    /// Data `(vec(A), b, c)` of `(x - mu)' M (x - mu) <= level` with `M` Wishart
    /// (identity scale, `dof` degrees of freedom), `A = M^{1/2}`, `b = 2 M mu`,
    /// `c = level - mu' M mu` and `mu` uniform on `[mean_low, mean_high]^d`.
    QuadraticWishart {
        d: usize,
        dof: usize,
        mean_low: f64,
        mean_high: f64,
        level: f64,
    },
    /// Matrices `Xi_j = base_j + W_j` with `W_j` Wishart (identity scale, `dof` degrees of
    /// freedom), concatenated row-major.
    SdpWishart {
        base: Vec<Vec<Vec<f64>>>,
        dof: usize,
    },
}

fn square(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let m = rows.len();
    if rows.iter().any(|r| r.len() != m) {
        return invalid(format!("{what} must be square"));
    }
    Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

/// Cholesky factor of a covariance given by rows.
fn chol(component: &GaussianComponent) -> Result<DMatrix<f64>> {
    let cov = square(&component.covariance, "covariance")?;
    if cov.nrows() != component.mean.len() {
        return invalid("covariance and mean dimensions differ");
    }
    Ok(cov
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("covariance is not positive definite".into()))?
        .l())
}

fn normal_vec(rng: &mut SeededRng, k: usize) -> DVector<f64> {
    DVector::from_fn(k, |_, _| -> f64 { StandardNormal.sample(rng) })
}

fn wishart(rng: &mut SeededRng, p: usize, dof: usize) -> DMatrix<f64> {
    let g: DMatrix<f64> = DMatrix::from_fn(p, dof, |_, _| StandardNormal.sample(rng));
    &g * g.transpose()
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

struct Prepared<'a> {
    sampler: &'a Sampler,
    factors: Vec<DMatrix<f64>>,
}

impl Sampler {
    /// Dimension of the generated vectors.
    pub fn dim(&self) -> usize {
        match self {
            Sampler::Gaussian(c) => c.mean.len(),
            Sampler::Mixture { components, .. } => components.first().map_or(0, |c| c.mean.len()),
            Sampler::Perturbation { a0, .. } => a0.len(),
            Sampler::LowRank { projection, .. } => projection.len(),
            Sampler::QuadraticWishart { d, .. } => d * d + d + 1,
            Sampler::SdpWishart { base, .. } => base.iter().map(|b| b.len() * b.len()).sum(),
        }
    }

    fn prepare(&self) -> Result<Prepared<'_>> {
        let factors = match self {
            Sampler::Gaussian(c) => vec![chol(c)?],
            Sampler::Mixture {
                weights,
                components,
            } => {
                if components.is_empty() || weights.len() != components.len() {
                    return invalid("mixture needs one weight per component");
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || !(weights.iter().sum::<f64>() > 0.0) {
                    return invalid("mixture weights must be nonnegative with a positive sum");
                }
                let m = components[0].mean.len();
                if components.iter().any(|c| c.mean.len() != m) {
                    return invalid("mixture components must share a dimension");
                }
                components.iter().map(chol).collect::<Result<_>>()?
            }
            Sampler::Perturbation {
                a0,
                directions,
                law,
            } => {
                if directions.iter().any(|a| a.len() != a0.len()) {
                    return invalid("perturbation directions must match a0");
                }
                if let PerturbationLaw::ScaledBeta { alpha, beta } = law {
                    if !(*alpha > 0.0 && *beta > 0.0) {
                        return invalid("beta parameters must be positive");
                    }
                }
                Vec::new()
            }
            Sampler::LowRank {
                projection,
                latent,
                noise,
            } => {
                let k = latent.mean.len();
                if projection.iter().any(|r| r.len() != k) {
                    return invalid("projection rows must match the latent dimension");
                }
                if !(*noise >= 0.0) {
                    return invalid("noise must be nonnegative");
                }
                vec![chol(latent)?]
            }
            Sampler::QuadraticWishart {
                d,
                dof,
                mean_low,
                mean_high,
                ..
            } => {
                if *d == 0 || *dof == 0 || !(mean_low <= mean_high) {
                    return invalid("invalid quadratic generator parameters");
                }
                Vec::new()
            }
            Sampler::SdpWishart { base, dof } => {
                let p = base.first().map_or(0, Vec::len);
                if p == 0 || *dof == 0 {
                    return invalid("invalid semidefinite generator parameters");
                }
                for b in base {
                    let m = square(b, "base matrix")?;
                    if m.nrows() != p || m != m.transpose() {
                        return invalid("base matrices must be symmetric and of equal size");
                    }
                }
                Vec::new()
            }
        };
        Ok(Prepared {
            sampler: self,
            factors,
        })
    }

    /// Draws `n` independent vectors.
    pub fn sample(&self, n: usize, rng: &mut SeededRng) -> Result<Dataset> {
        let prepared = self.prepare()?;
        let m = self.dim();
        let mut values = Vec::with_capacity(n * m);
        for _ in 0..n {
            values.extend(prepared.draw(rng)?);
        }
        Dataset::new(values, n, m)
    }
}

impl Prepared<'_> {
    fn gaussian(&self, rng: &mut SeededRng, c: &GaussianComponent, l: &DMatrix<f64>) -> Vec<f64> {
        let z = l * normal_vec(rng, c.mean.len());
        c.mean.iter().zip(z.iter()).map(|(a, b)| a + b).collect()
    }

    fn draw(&self, rng: &mut SeededRng) -> Result<Vec<f64>> {
        Ok(match self.sampler {
            Sampler::Gaussian(c) => self.gaussian(rng, c, &self.factors[0]),
            Sampler::Mixture {
                weights,
                components,
            } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut k = components.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        k = i;
                        break;
                    }
                    u -= w;
                }
                self.gaussian(rng, &components[k], &self.factors[k])
            }
            Sampler::Perturbation {
                a0,
                directions,
                law,
            } => {
                let mut xi = a0.clone();
                let beta = match law {
                    PerturbationLaw::ScaledBeta { alpha, beta } => Some(
                        Beta::new(*alpha, *beta)
                            .map_err(|e| Error::InvalidArgument(e.to_string()))?,
                    ),
                    PerturbationLaw::StandardNormal => None,
                };
                for a in directions {
                    let z = match &beta {
                        Some(b) => 2.0 * b.sample(rng) - 1.0,
                        None => StandardNormal.sample(rng),
                    };
                    for (v, ai) in xi.iter_mut().zip(a) {
                        *v += z * ai;
                    }
                }
                xi
            }
            Sampler::LowRank {
                projection,
                latent,
                noise,
            } => {
                let z = self.gaussian(rng, latent, &self.factors[0]);
                let w = Uniform::new_inclusive(-noise, *noise)
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                projection
                    .iter()
                    .map(|row| row.iter().zip(&z).map(|(p, v)| p * v).sum::<f64>() + w.sample(rng))
                    .collect()
            }
            Sampler::QuadraticWishart {
                d,
                dof,
                mean_low,
                mean_high,
                level,
            } => {
                let m = wishart(rng, *d, *dof);
                let mu = DVector::from_fn(*d, |_, _| rng.random_range(*mean_low..=*mean_high));
                let mmu = &m * &mu;
                let b: Vec<f64> = mmu.iter().map(|v| 2.0 * v).collect();
                let c = level - mu.dot(&mmu);
                quadratic_vector(&psd_sqrt(&m), &b, c)
            }
            Sampler::SdpWishart { base, dof } => {
                let blocks: Vec<DMatrix<f64>> = base
                    .iter()
                    .map(|b| {
                        let p = b.len();
                        DMatrix::from_fn(p, p, |i, j| b[i][j]) + wishart(rng, p, *dof)
                    })
                    .collect();
                sdp_vector(&blocks)
            }
        })
    }
}
