//! Closed-form or LP evaluation of `sup_{xi in U} xi' y` for a fixed coefficient vector.

use nalgebra::{DMatrix, DVector};

use crate::conic::{solve, Affine, ProgramBuilder, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::model::dot;
use crate::shapes::Shape;

fn polytope_sup(normals: &[Vec<f64>], e: &[f64], y: &[f64]) -> Result<f64> {
    let m = y.len();
    let mut b = ProgramBuilder::new();
    let xi = b.new_vars(m);
    for (j, &v) in y.iter().enumerate() {
        b.set_cost(xi[j], -v);
    }
    for (a, &off) in normals.iter().zip(e) {
        let terms = a.iter().enumerate().map(|(j, &v)| (xi[j], -v)).collect();
        b.add_nonneg(Affine::from_terms(off, terms));
    }
    let sol = solve(&b.build(), &SolverSettings::default())?;
    match sol.status {
        SolveStatus::Optimal => Ok(-sol.primal_objective),
        SolveStatus::Unbounded => Ok(f64::INFINITY),
        SolveStatus::Infeasible => Ok(f64::NEG_INFINITY),
        other => Err(Error::DegeneratePolytope(format!(
            "inner maximization ended with status {other:?}"
        ))),
    }
}

/// `sup { xi' y : t(xi) <= size }`; `+inf` when unbounded and `-inf` when the set is empty.
pub fn worst_case_lhs(shape: &Shape, size: f64, y: &[f64]) -> Result<f64> {
    shape.validate()?;
    if y.len() != shape.dim() {
        return Err(Error::InvalidArgument(
            "coefficient vector has the wrong dimension".into(),
        ));
    }
    match shape {
        Shape::Ellipsoid { .. } | Shape::DiagEllipsoid { .. } | Shape::Ball { .. } => {
            if size < 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let (center, l) = shape.ellipsoid_factor().expect("ellipsoidal variant");
            let lty = l.transpose() * DVector::from_column_slice(y);
            Ok(dot(&center, y) + size.sqrt() * lty.norm())
        }
        Shape::Polytope {
            normals,
            offsets,
            interior,
        } => {
            let e: Vec<f64> = normals
                .iter()
                .zip(offsets)
                .map(|(a, b)| {
                    let base = dot(a, interior);
                    base + size * (b - base)
                })
                .collect();
            polytope_sup(normals, &e, y)
        }
        Shape::ScaledHalfspaces {
            normals,
            offsets,
            scales,
        } => {
            let e: Vec<f64> = offsets
                .iter()
                .zip(scales)
                .map(|(b, k)| b + size * k)
                .collect();
            polytope_sup(normals, &e, y)
        }
        Shape::BoxGrid {
            centers,
            half_width,
        } => {
            if size < 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let l1: f64 = y.iter().map(|v| v.abs()).sum();
            Ok(centers
                .iter()
                .map(|c| dot(c, y) + size * half_width * l1)
                .fold(f64::NEG_INFINITY, f64::max))
        }
        Shape::PcaEllipsoid {
            projection,
            center,
            factor,
        } => {
            if size < 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let r = center.len();
            let m = y.len();
            let p = DMatrix::from_fn(r, m, |i, j| projection[i][j]);
            let yv = DVector::from_column_slice(y);
            let gram = &p * p.transpose();
            let w = gram
                .lu()
                .solve(&(&p * &yv))
                .ok_or_else(|| Error::DegenerateShape("projection rows are dependent".into()))?;
            let resid = (p.transpose() * &w - &yv).norm();
            if resid > 1e-9 * yv.norm().max(1.0) {
                return Ok(f64::INFINITY);
            }
            let l = DMatrix::from_fn(r, r, |i, j| if j <= i { factor[i][j] } else { 0.0 });
            let ltw = l.transpose() * &w;
            Ok(dot(center, w.as_slice()) + size.sqrt() * ltw.norm())
        }
        Shape::Union(parts) => parts.iter().try_fold(f64::NEG_INFINITY, |acc, p| {
            Ok(acc.max(worst_case_lhs(p, size, y)?))
        }),
        Shape::Projected { offset, shape, .. } => {
            let k = shape.dim();
            let outside = y
                .iter()
                .enumerate()
                .any(|(i, v)| (i < *offset || i >= offset + k) && *v != 0.0);
            if outside {
                return Ok(f64::INFINITY);
            }
            worst_case_lhs(shape, size, &y[*offset..offset + k])
        }
        Shape::Intersection(parts) => {
            if parts.iter().all(|p| matches!(p, Shape::Projected { .. })) {
                let mut covered = vec![false; y.len()];
                let mut total = 0.0;
                for p in parts {
                    if let Shape::Projected { offset, shape, .. } = p {
                        let k = shape.dim();
                        covered[*offset..offset + k]
                            .iter_mut()
                            .for_each(|c| *c = true);
                        let block = &y[*offset..offset + k];
                        if block.iter().any(|v| *v != 0.0) {
                            total += worst_case_lhs(shape, size, block)?;
                        }
                    }
                }
                if y.iter().zip(&covered).any(|(v, c)| !c && *v != 0.0) {
                    return Ok(f64::INFINITY);
                }
                return Ok(total);
            }
            let mut normals = Vec::new();
            let mut e = Vec::new();
            for p in parts {
                match p {
                    Shape::Polytope {
                        normals: n,
                        offsets,
                        interior,
                    } => {
                        for (a, b) in n.iter().zip(offsets) {
                            let base = dot(a, interior);
                            normals.push(a.clone());
                            e.push(base + size * (b - base));
                        }
                    }
                    Shape::ScaledHalfspaces {
                        normals: n,
                        offsets,
                        scales,
                    } => {
                        for ((a, b), k) in n.iter().zip(offsets).zip(scales) {
                            normals.push(a.clone());
                            e.push(b + size * k);
                        }
                    }
                    other => {
                        return Err(Error::UnsupportedCombination {
                            family: "linear".into(),
                            shape: format!("intersection containing {}", other.name()),
                            supported: super::SUPPORTED_PAIRS.into(),
                        })
                    }
                }
            }
            polytope_sup(&normals, &e, y)
        }
    }
}
