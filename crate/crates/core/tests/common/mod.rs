//! Helpers shared by the integration tests: independent oracles and random instances.
#![allow(dead_code)]

use lbro_core::conic::{Affine, ConicProgram, ProgramBuilder};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub use lbro_core::model::{rng_from_seed, SeededRng};

pub mod joint;
pub mod lmi;
pub mod rc;
pub mod solver;

pub fn normal_vec(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| -> f64 { StandardNormal.sample(rng) })
        .collect()
}

pub fn uniform_vec(rng: &mut SeededRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Random SPD matrix `G G' + 0.1 I`.
pub fn random_spd(rng: &mut SeededRng, m: usize) -> DMatrix<f64> {
    let g: DMatrix<f64> = DMatrix::from_fn(m, m, |_, _| -> f64 { StandardNormal.sample(rng) });
    &g * g.transpose() + DMatrix::identity(m, m) * 0.1
}

/// Uniform direction on the unit sphere.
pub fn unit_sphere(rng: &mut SeededRng, m: usize) -> Vec<f64> {
    loop {
        let v = normal_vec(rng, m);
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.iter().map(|a| a / n).collect();
        }
    }
}

/// Boundary-biased point of the unit ball: a sphere direction with radius `u^(1/8)`.
pub fn ball_point_biased(rng: &mut SeededRng, m: usize) -> Vec<f64> {
    let r: f64 = rng.random::<f64>().powf(0.125);
    unit_sphere(rng, m).into_iter().map(|v| v * r).collect()
}

/// Symmetric square root through an eigendecomposition (independent of any Cholesky path).
pub fn sym_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Vertices of `{x : G x <= h}` in dimension `d <= 3` by enumerating `d`-subsets of rows.
pub fn vertices(g: &[Vec<f64>], h: &[f64], d: usize) -> Vec<Vec<f64>> {
    let k = g.len();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        let m = DMatrix::from_fn(d, d, |i, j| g[idx[i]][j]);
        let rhs = DVector::from_iterator(d, idx.iter().map(|&i| h[i]));
        if m.determinant().abs() > 1e-10 {
            if let Some(x) = m.lu().solve(&rhs) {
                let x: Vec<f64> = x.iter().copied().collect();
                if g.iter().zip(h).all(|(row, &hi)| dot(row, &x) <= hi + 1e-9) {
                    out.push(x);
                }
            }
        }
        // next combination
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < k - d + i {
                idx[i] += 1;
                for j in i + 1..d {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// LP `min c'x s.t. G x <= h` as a conic program.
pub fn lp_program(c: &[f64], g: &[Vec<f64>], h: &[f64]) -> ConicProgram {
    let mut b = ProgramBuilder::new();
    let x = b.new_vars(c.len());
    for (j, &cj) in c.iter().enumerate() {
        b.set_cost(x[j], cj);
    }
    for (row, &hi) in g.iter().zip(h) {
        let terms = row.iter().enumerate().map(|(j, &v)| (x[j], -v)).collect();
        b.add_nonneg(Affine::from_terms(hi, terms));
    }
    b.build()
}
