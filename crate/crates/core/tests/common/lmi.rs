//! Random instances of the quadratic and semidefinite matrix inequalities, checked by
//! eigenvalues at a fixed decision against sampled perturbations.

use lbro_core::reformulate::{rc_quadratic_ellipsoid, rc_sdp_normbounded, QuadraticTerm};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::rc::ball_point;
use super::*;

/// Largest value of a concave function on `[lo, hi]` by golden-section search.
pub fn maximize_concave(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        }
    }
    let t = 0.5 * (lo + hi);
    (t, f(t))
}

fn random_matrix(rng: &mut SeededRng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_vec(r, c, normal_vec(rng, r * c)) * scale
}

fn random_sym(rng: &mut SeededRng, p: usize, scale: f64) -> DMatrix<f64> {
    let g = random_matrix(rng, p, p, scale);
    (&g + g.transpose()) * 0.5
}

/// Outcome of one random matrix-inequality instance at a fixed decision.
pub struct LmiCase {
    /// Matrix equals its transpose entrywise at the evaluated point.
    pub symmetric: bool,
    /// Best smallest eigenvalue over the slack variable.
    pub lmi_margin: f64,
    /// Largest constraint violation over the sampled perturbations (positive = violated).
    pub sampled_violation: f64,
}

impl LmiCase {
    pub fn lmi_feasible(&self) -> bool {
        self.lmi_margin >= 1e-9
    }
}

fn quadratic_value(t: &[QuadraticTerm], u: &[f64], x: &[f64]) -> f64 {
    let mut a = t[0].a.clone();
    let mut b = DVector::from_column_slice(&t[0].b);
    let mut c = t[0].c;
    for (j, &uj) in u.iter().enumerate() {
        a += &t[j + 1].a * uj;
        b += DVector::from_column_slice(&t[j + 1].b) * uj;
        c += t[j + 1].c * uj;
    }
    let xv = DVector::from_column_slice(x);
    (&a * &xv).norm_squared() - b.dot(&xv) - c
}

/// `x' A' A x - b' x - c <= 0` over `(A, b, c) = term0 + sum_j u_j term_j`, `||u|| <= 1`,
/// with `d = 2`, `A` of shape `2 x 2` and two directions.
pub fn quadratic_case(rng: &mut SeededRng, samples: usize) -> LmiCase {
    let (d, q, k) = (2, 2, 2);
    let mut terms = vec![QuadraticTerm {
        a: random_matrix(rng, q, d, 0.5),
        b: normal_vec(rng, d),
        c: rng.random_range(0.5..3.0),
    }];
    for _ in 0..k {
        terms.push(QuadraticTerm {
            a: random_matrix(rng, q, d, 0.2),
            b: normal_vec(rng, d).iter().map(|v| 0.2 * v).collect(),
            c: 0.2 * normal_vec(rng, 1)[0],
        });
    }
    let x: Vec<f64> = normal_vec(rng, d).iter().map(|v| 0.7 * v).collect();
    let lmi = rc_quadratic_ellipsoid(&terms[0], &terms[1..], &[0, 1], 2).unwrap();
    let at = |tau: f64| lmi.eval(&[x[0], x[1], tau]);
    let sample = at(0.7);
    let (_, margin) = maximize_concave(|tau| min_eigenvalue(&at(tau)), 0.0, 50.0);
    let sampled_violation = (0..samples)
        .map(|_| quadratic_value(&terms, &ball_point(rng, k), &x))
        .fold(f64::NEG_INFINITY, f64::max);
    LmiCase {
        symmetric: sample == sample.transpose(),
        lmi_margin: margin,
        sampled_violation,
    }
}

/// `B + sum_j x_j (Abar_j + Z_j) >= 0` over symmetric `Z_j` whose stacked matrix has
/// spectral norm at most `rho`, with `d = 2` and `p = 2`.
pub fn sdp_case(rng: &mut SeededRng, samples: usize) -> LmiCase {
    let (d, p) = (2, 2);
    let centers: Vec<DMatrix<f64>> = (0..d).map(|_| random_sym(rng, p, 0.5)).collect();
    let b = random_sym(rng, p, 0.3) + DMatrix::identity(p, p) * rng.random_range(0.5..3.0);
    let rho = rng.random_range(0.05..0.6);
    let x = normal_vec(rng, d);
    let lmi = rc_sdp_normbounded(&centers, &b, rho, &[0, 1], 2).unwrap();
    let at = |lambda: f64| lmi.eval(&[x[0], x[1], lambda]);
    let sample = at(0.3);
    let (_, margin) = maximize_concave(|l| min_eigenvalue(&at(l)), 0.0, 50.0);
    let sampled_violation = (0..samples)
        .map(|_| {
            let blocks: Vec<DMatrix<f64>> = (0..d).map(|_| random_sym(rng, p, 1.0)).collect();
            let mut stacked = DMatrix::zeros(d * p, p);
            for (j, z) in blocks.iter().enumerate() {
                stacked.view_mut((j * p, 0), (p, p)).copy_from(z);
            }
            let norm = stacked.singular_values().max();
            let radius = if rng.random::<f64>() < 0.9 {
                rho
            } else {
                rho * rng.random::<f64>()
            };
            let mut m = b.clone();
            for j in 0..d {
                m += (&centers[j] + &blocks[j] * (radius / norm)) * x[j];
            }
            -min_eigenvalue(&m)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    LmiCase {
        symmetric: sample == sample.transpose(),
        lmi_margin: margin,
        sampled_violation,
    }
}
