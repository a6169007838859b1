//! Random robust-constraint instances with three independent evaluations of the worst case
//! `sup_{xi in U} xi' y`: the emitted conic counterpart solved with `y` fixed, the closed
//! form, and the maximum over points sampled inside the set.

use lbro_core::conic::{solve, Affine, SolveStatus, SolverSettings};
use lbro_core::reformulate::{rc_linear_vecnorm, robust_le, worst_case_lhs, RobustBuilder};
use lbro_core::shapes::Shape;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::*;

/// Lower-triangular rows of the Cholesky factor, in the layout stored by shapes.
pub fn factor_rows(s: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let l = s.clone().cholesky().expect("SPD").l();
    (0..l.nrows())
        .map(|i| (0..=i).map(|j| l[(i, j)]).collect())
        .collect()
}

/// Optimal `t` of `min t s.t. sup_{xi in U} xi' y <= t`, i.e. the worst case as seen
/// through the emitted counterpart.
pub fn counterpart_value(
    emit: impl FnOnce(&mut RobustBuilder, &[Affine], &Affine),
    y: &[f64],
) -> f64 {
    let mut rb = RobustBuilder::new();
    let t = rb.builder.new_var();
    rb.builder.set_cost(t, 1.0);
    let ys: Vec<Affine> = y.iter().map(|&v| Affine::constant(v)).collect();
    emit(&mut rb, &ys, &Affine::var(t));
    let sol = solve(&rb.builder.build(), &SolverSettings::default()).expect("solver runs");
    assert_eq!(sol.status, SolveStatus::Optimal);
    sol.x[t]
}

pub fn shape_counterpart_value(shape: &Shape, size: f64, y: &[f64]) -> f64 {
    counterpart_value(
        |rb, ys, rhs| robust_le(rb, shape, size, ys, rhs).expect("supported shape"),
        y,
    )
}

/// A random instance with its three worst-case evaluations.
pub struct RcCase {
    pub counterpart: f64,
    pub closed_form: f64,
    pub sampled_max: f64,
}

impl RcCase {
    /// Relative gap between the counterpart and the sampled maximum.
    pub fn gap(&self) -> f64 {
        (self.counterpart - self.sampled_max) / self.counterpart.abs().max(1.0)
    }

    pub fn agreement(&self) -> f64 {
        (self.counterpart - self.closed_form).abs() / self.closed_form.abs().max(1.0)
    }
}

/// Point of the unit ball, on the sphere with probability 0.9 and uniform otherwise.
pub fn ball_point(rng: &mut SeededRng, m: usize) -> Vec<f64> {
    let r = if rng.random::<f64>() < 0.9 {
        1.0
    } else {
        rng.random::<f64>().powf(1.0 / m as f64)
    };
    unit_sphere(rng, m).into_iter().map(|v| v * r).collect()
}

fn max_over<F: FnMut(&mut SeededRng) -> Vec<f64>>(
    rng: &mut SeededRng,
    samples: usize,
    y: &[f64],
    mut point: F,
) -> f64 {
    (0..samples)
        .map(|_| dot(&point(rng), y))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Ellipsoid `{c + L u : ||u||^2 <= s}`; samples use the symmetric square root of the
/// covariance rather than its Cholesky factor.
pub fn ellipsoid_case(rng: &mut SeededRng, m: usize, samples: usize) -> RcCase {
    let center = normal_vec(rng, m);
    let cov = random_spd(rng, m);
    let size: f64 = rng.random_range(0.5..3.0);
    let y = unit_sphere(rng, m);
    let shape = Shape::Ellipsoid {
        center: center.clone(),
        factor: factor_rows(&cov),
    };
    let root = sym_sqrt(&cov) * size.sqrt();
    let c = DVector::from_column_slice(&center);
    let sampled_max = max_over(rng, samples, &y, |rng| {
        let u = DVector::from_vec(ball_point(rng, m));
        (&c + &root * u).iter().copied().collect()
    });
    RcCase {
        counterpart: shape_counterpart_value(&shape, size, &y),
        closed_form: worst_case_lhs(&shape, size, &y).unwrap(),
        sampled_max,
    }
}

/// Random bounded polytope containing the origin: a box plus a few random cuts.
pub fn random_polytope(rng: &mut SeededRng, m: usize, cuts: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut normals = Vec::new();
    let mut offsets = Vec::new();
    for j in 0..m {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; m];
            e[j] = sign;
            normals.push(e);
            offsets.push(rng.random_range(1.0..2.0));
        }
    }
    for _ in 0..cuts {
        normals.push(unit_sphere(rng, m));
        offsets.push(rng.random_range(0.5..1.5));
    }
    (normals, offsets)
}

/// Convex combination of the vertices with weights concentrated on one of them.
pub fn polytope_point(rng: &mut SeededRng, verts: &[Vec<f64>]) -> Vec<f64> {
    let logits: Vec<f64> = normal_vec(rng, verts.len())
        .iter()
        .map(|z| 12.0 * z)
        .collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let m = verts[0].len();
    (0..m)
        .map(|k| verts.iter().zip(&w).map(|(v, wi)| v[k] * wi).sum::<f64>() / total)
        .collect()
}

/// Polytope shape `{a_i' xi <= b_i}` around the origin, scaled by a random size.
pub fn polytope_case(rng: &mut SeededRng, m: usize, samples: usize) -> (RcCase, f64) {
    let (normals, offsets) = random_polytope(rng, m, 3);
    let size: f64 = rng.random_range(0.5..1.5);
    let y = unit_sphere(rng, m);
    let shape = Shape::Polytope {
        normals: normals.clone(),
        offsets: offsets.clone(),
        interior: vec![0.0; m],
    };
    let scaled: Vec<f64> = offsets.iter().map(|b| b * size).collect();
    let verts = vertices(&normals, &scaled, m);
    let vertex_max = verts
        .iter()
        .map(|v| dot(v, &y))
        .fold(f64::NEG_INFINITY, f64::max);
    let sampled_max = max_over(rng, samples, &y, |rng| polytope_point(rng, &verts));
    let case = RcCase {
        counterpart: shape_counterpart_value(&shape, size, &y),
        closed_form: worst_case_lhs(&shape, size, &y).unwrap(),
        sampled_max,
    };
    (case, vertex_max)
}

/// Row `row` of `A x <= b` with `vec(A)` in `{||M (vec(A) - c)|| <= rho}`, `A` of shape
/// `2 x 2`.
pub fn vecnorm_case(rng: &mut SeededRng, samples: usize) -> RcCase {
    let (l, d) = (2, 2);
    let n = l * d;
    let center = normal_vec(rng, n);
    let m = DMatrix::from_fn(n, n, |i, j| {
        let g: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
        0.3 * g + if i == j { 1.5 } else { 0.0 }
    });
    let rho = rng.random_range(0.5..2.0);
    let x = normal_vec(rng, d);
    let row = rng.random_range(0..l);
    let mut y = vec![0.0; n];
    y[row * d..(row + 1) * d].copy_from_slice(&x);
    let m_inv = m.clone().try_inverse().expect("invertible");
    let closed_form =
        dot(&center, &y) + rho * (m_inv.transpose() * DVector::from_column_slice(&y)).norm();
    let c = DVector::from_column_slice(&center);
    let sampled_max = max_over(rng, samples, &y, |rng| {
        let u = DVector::from_vec(ball_point(rng, n));
        (&c + &m_inv * u * rho).iter().copied().collect()
    });
    let counterpart = counterpart_value(
        |rb, ys, rhs| rc_linear_vecnorm(rb, &center, &m, rho, ys, rhs).expect("invertible"),
        &y,
    );
    RcCase {
        counterpart,
        closed_form,
        sampled_max,
    }
}

/// Reduced-coordinate ellipsoid `{(P xi - c)' S^{-1} (P xi - c) <= s}` with `P` of shape
/// `r x m` and `y` in the row space of `P` (otherwise the worst case is infinite).
pub fn pca_case(rng: &mut SeededRng, m: usize, r: usize, samples: usize) -> RcCase {
    let p = DMatrix::from_fn(r, m, |_, _| -> f64 {
        rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
    });
    let center = normal_vec(rng, r);
    let cov = random_spd(rng, r);
    let size: f64 = rng.random_range(0.5..2.0);
    let w = DVector::from_vec(unit_sphere(rng, r));
    let y: Vec<f64> = (p.transpose() * &w).iter().copied().collect();
    let shape = Shape::PcaEllipsoid {
        projection: (0..r).map(|i| p.row(i).iter().copied().collect()).collect(),
        center: center.clone(),
        factor: factor_rows(&cov),
    };
    // xi = P^+ (c + S^{1/2} u sqrt(s)) + (I - P^+ P) z
    let pinv = p.transpose() * (&p * p.transpose()).try_inverse().expect("full row rank");
    let null = DMatrix::identity(m, m) - &pinv * &p;
    let root = sym_sqrt(&cov) * size.sqrt();
    let c = DVector::from_column_slice(&center);
    let sampled_max = max_over(rng, samples, &y, |rng| {
        let u = DVector::from_vec(ball_point(rng, r));
        let z = DVector::from_vec(normal_vec(rng, m)) * 10.0;
        (&pinv * (&c + &root * u) + &null * z)
            .iter()
            .copied()
            .collect()
    });
    RcCase {
        counterpart: shape_counterpart_value(&shape, size, &y),
        closed_form: worst_case_lhs(&shape, size, &y).unwrap(),
        sampled_max,
    }
}
