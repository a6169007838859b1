//! Counterparts of one uncertain linear row `sup_{xi in U} xi' y <= rhs`.

use nalgebra::DMatrix;

use super::{RobustBuilder, VarRole};
use crate::conic::Affine;
use crate::error::{invalid, Error, Result};

fn combine(coeffs: &[f64], y: &[Affine]) -> Affine {
    let mut out = Affine::default();
    for (c, e) in coeffs.iter().zip(y) {
        out.add_scaled(e, *c);
    }
    out
}

/// `center' y + rho ||L' y|| <= rhs` for the ellipsoid `{center + L u : ||u|| <= rho}`.
/// With `rho = 0` the nominal row `center' y <= rhs` is emitted.
pub fn rc_linear_ellipsoid(
    rb: &mut RobustBuilder,
    center: &[f64],
    factor: &DMatrix<f64>,
    rho: f64,
    y: &[Affine],
    rhs: &Affine,
) {
    let mut head = rhs.clone();
    head.add_scaled(&combine(center, y), -1.0);
    if rho == 0.0 {
        rb.builder.add_nonneg(head);
        return;
    }
    let mut block = Vec::with_capacity(factor.ncols() + 1);
    block.push(head);
    for i in 0..factor.ncols() {
        let col: Vec<f64> = factor.column(i).iter().map(|v| rho * v).collect();
        block.push(combine(&col, y));
    }
    rb.builder.add_soc(block);
}

/// Same constraint for `{A : ||M (vec(A) - center)|| <= rho}`: the worst case is
/// `center' y + rho ||M'^{-1} y||`.
pub fn rc_linear_vecnorm(
    rb: &mut RobustBuilder,
    center: &[f64],
    m: &DMatrix<f64>,
    rho: f64,
    y: &[Affine],
    rhs: &Affine,
) -> Result<()> {
    let n = center.len();
    if m.shape() != (n, n) || y.len() != n {
        return invalid("norm matrix must be square with the dimension of the center");
    }
    let inv_t = m
        .transpose()
        .lu()
        .try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::DegenerateShape("norm matrix is singular".into()))?;
    // ||inv_t y|| = ||L' y|| with L = inv_t'
    rc_linear_ellipsoid(rb, center, &inv_t.transpose(), rho, y, rhs);
    Ok(())
}

/// Dual form for the polytope `{xi : D xi <= e}`: `p >= 0, D' p = y, e' p <= rhs`.
///
/// Facets are grouped by overlapping coordinate support; groups that share no
/// coordinate with `y` cannot affect the worst case and are left out.
pub fn rc_linear_polytope(
    rb: &mut RobustBuilder,
    normals: &[Vec<f64>],
    e: &[f64],
    y: &[Affine],
    rhs: &Affine,
) {
    let m = y.len();
    // union-find over coordinates linked by a common facet
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut j = i;
        while parent[j] != r {
            let next = parent[j];
            parent[j] = r;
            j = next;
        }
        r
    }
    let supports: Vec<Vec<usize>> = normals
        .iter()
        .map(|a| (0..m).filter(|&k| a[k] != 0.0).collect())
        .collect();
    for s in &supports {
        for w in s.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            parent[a] = b;
        }
    }
    let active_y: Vec<usize> = (0..m)
        .filter(|&k| !(y[k].constant == 0.0 && y[k].is_constant()))
        .collect();
    let mut live_roots: Vec<usize> = active_y.iter().map(|&k| find(&mut parent, k)).collect();
    live_roots.sort_unstable();
    live_roots.dedup();
    let facets: Vec<usize> = (0..normals.len())
        .filter(|&i| {
            supports[i]
                .first()
                .is_some_and(|&k| live_roots.binary_search(&find(&mut parent, k)).is_ok())
        })
        .collect();
    let mut coords: Vec<usize> = active_y.clone();
    for &i in &facets {
        coords.extend(&supports[i]);
    }
    coords.sort_unstable();
    coords.dedup();

    let row = rb.row();
    let p: Vec<usize> = facets
        .iter()
        .map(|&facet| rb.var(VarRole::PolytopeDual { row, facet }))
        .collect();
    for &v in &p {
        rb.builder.add_nonneg(Affine::var(v));
    }
    for &k in &coords {
        let mut eq = y[k].scaled(-1.0);
        for (&i, &v) in facets.iter().zip(&p) {
            eq.add_term(v, normals[i][k]);
        }
        rb.builder.add_zero(eq);
    }
    let lhs = Affine::from_terms(
        0.0,
        facets.iter().zip(&p).map(|(&i, &v)| (v, e[i])).collect(),
    );
    rb.builder.add_le(&lhs, rhs);
}

/// Counterpart over `{xi : (P xi - c)' S^{-1} (P xi - c) <= s}` with `S = L L'`:
/// `c' G u + sqrt(s) lambda <= rhs`, `P' G u = y`, `||u|| <= lambda`, where `G = L^{-T}`.
pub fn rc_pca(
    rb: &mut RobustBuilder,
    projection: &[Vec<f64>],
    center: &[f64],
    factor: &[Vec<f64>],
    size: f64,
    y: &[Affine],
    rhs: &Affine,
) -> Result<()> {
    let r = center.len();
    let l = DMatrix::from_fn(r, r, |i, j| if j <= i { factor[i][j] } else { 0.0 });
    let g = l
        .transpose()
        .solve_upper_triangular(&DMatrix::identity(r, r))
        .filter(|g| g.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::DegenerateShape("reduced covariance is rank deficient".into()))?;
    let m = y.len();
    let row = rb.row();
    let u: Vec<usize> = (0..r)
        .map(|component| rb.var(VarRole::PcaDirection { row, component }))
        .collect();
    let lambda = rb.var(VarRole::PcaNorm { row });
    // P' G, shape m x r
    let pg: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..r)
                .map(|k| (0..r).map(|t| projection[t][i] * g[(t, k)]).sum())
                .collect()
        })
        .collect();
    for i in 0..m {
        let mut eq = y[i].scaled(-1.0);
        for k in 0..r {
            eq.add_term(u[k], pg[i][k]);
        }
        rb.builder.add_zero(eq);
    }
    let mut lhs = Affine::default();
    for k in 0..r {
        let cg: f64 = (0..r).map(|t| center[t] * g[(t, k)]).sum();
        lhs.add_term(u[k], cg);
    }
    lhs.add_term(lambda, size.max(0.0).sqrt());
    rb.builder.add_le(&lhs, rhs);
    let mut block = vec![Affine::var(lambda)];
    block.extend(u.iter().map(|&v| Affine::var(v)));
    rb.builder.add_soc(block);
    Ok(())
}
