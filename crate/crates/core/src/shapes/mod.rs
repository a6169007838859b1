//! Uncertainty-set shapes, their scalar transform maps and Phase-1 fitting.
//!
//! Every shape `S` comes with a transform `t` such that the family of sets
//! `{xi : t(xi) <= s}` is nested in `s`. Ellipsoidal transforms are squared
//! Mahalanobis distances; polytope transforms measure the relative position of `xi`
//! between an interior point and each facet. Unions take the minimum of their
//! components' transforms and intersections the maximum.

mod fit;
mod kmeans;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calibrate::{calibrate_size, CalibResult};
use crate::conic::{solve, Affine, ProgramBuilder, SolveStatus, SolverSettings};
use crate::error::{invalid, Error, Result};
use crate::model::{dot, Dataset};

pub use fit::{
    ball_basis, block_ellipsoids, cluster_union, fit_ellipsoid, fit_polytope_box, grid_histogram,
    pca_ellipsoid, polytope_from_halfspaces, EllipsoidMode, GRID_BOX_LIMIT,
};
pub use kmeans::{kmeans, KMeansResult};

/// Interior points closer than this (relative to the offset scale) to a facet are rejected.
const INTERIOR_TOL: f64 = 1e-12;

/// A learned shape. Serialized as `{"variant": ..., "parameters": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "parameters", rename_all = "snake_case")]
pub enum Shape {
    /// `t = (xi - center)' S^{-1} (xi - center)` with `S = L L'`; `factor` holds the rows of
    /// the lower-triangular `L`.
    Ellipsoid {
        center: Vec<f64>,
        factor: Vec<Vec<f64>>,
    },
    /// Ellipsoid with a diagonal shape matrix.
    DiagEllipsoid {
        center: Vec<f64>,
        variances: Vec<f64>,
    },
    /// `t = ||xi - center||^2`.
    Ball { center: Vec<f64> },
    /// `{xi : a_i' xi <= b_i}` with `t = max_i a_i'(xi - mu) / (b_i - a_i' mu)` for the
    /// strictly interior point `mu`.
    Polytope {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        interior: Vec<f64>,
    },
    /// Ellipsoid in the reduced coordinates `y = P xi`: `t = (y - center)' S^{-1} (y - center)`
    /// with `P` of shape `r x m` (rows in `projection`) and `S = L L'`.
    PcaEllipsoid {
        projection: Vec<Vec<f64>>,
        center: Vec<f64>,
        factor: Vec<Vec<f64>>,
    },
    /// Minimum of the component transforms.
    Union(Vec<Shape>),
    /// Maximum of the component transforms.
    Intersection(Vec<Shape>),
    /// Union of axis-aligned boxes: `t = min_i ||xi - c_i||_inf / half_width`.
    BoxGrid {
        centers: Vec<Vec<f64>>,
        half_width: f64,
    },
    /// `t = max_j (a_j' xi - b_j) / k_j`; the level set at `s` is `{a_j' xi <= b_j + s k_j}`.
    ScaledHalfspaces {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        scales: Vec<f64>,
    },
    /// A shape acting on the coordinates `offset..offset + inner dim` of a vector of
    /// dimension `dim`.
    Projected {
        offset: usize,
        dim: usize,
        shape: Box<Shape>,
    },
}

fn lower_factor(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let r = rows.len();
    DMatrix::from_fn(r, r, |i, j| if j <= i { rows[i][j] } else { 0.0 })
}

/// `||L^{-1} v||^2` for a lower-triangular `L` given by rows.
fn mahalanobis_sq(factor: &[Vec<f64>], v: &[f64]) -> f64 {
    let mut y = vec![0.0; v.len()];
    for i in 0..v.len() {
        let mut acc = v[i];
        for j in 0..i {
            acc -= factor[i][j] * y[j];
        }
        y[i] = acc / factor[i][i];
    }
    y.iter().map(|a| a * a).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

impl Shape {
    /// Short name of the variant.
    pub fn name(&self) -> &'static str {
        match self {
            Shape::Ellipsoid { .. } => "ellipsoid",
            Shape::DiagEllipsoid { .. } => "diag_ellipsoid",
            Shape::Ball { .. } => "ball",
            Shape::Polytope { .. } => "polytope",
            Shape::PcaEllipsoid { .. } => "pca_ellipsoid",
            Shape::Union(_) => "union",
            Shape::Intersection(_) => "intersection",
            Shape::BoxGrid { .. } => "box_grid",
            Shape::ScaledHalfspaces { .. } => "scaled_halfspaces",
            Shape::Projected { .. } => "projected",
        }
    }

    /// Dimension of the vectors the transform acts on.
    pub fn dim(&self) -> usize {
        match self {
            Shape::Ellipsoid { center, .. }
            | Shape::DiagEllipsoid { center, .. }
            | Shape::Ball { center } => center.len(),
            Shape::Polytope { interior, .. } => interior.len(),
            Shape::PcaEllipsoid { projection, .. } => projection.first().map_or(0, Vec::len),
            Shape::Union(parts) | Shape::Intersection(parts) => parts.first().map_or(0, Shape::dim),
            Shape::BoxGrid { centers, .. } => centers.first().map_or(0, Vec::len),
            Shape::ScaledHalfspaces { normals, .. } => normals.first().map_or(0, Vec::len),
            Shape::Projected { dim, .. } => *dim,
        }
    }

    fn is_basic(&self) -> bool {
        !matches!(
            self,
            Shape::Union(_) | Shape::Intersection(_) | Shape::Projected { .. }
        )
    }

    /// Checks dimensions, positivity of factors, strict interiority and nesting depth.
    pub fn validate(&self) -> Result<()> {
        let m = self.dim();
        if m == 0 {
            return invalid(format!("{} has dimension zero", self.name()));
        }
        let finite = |v: &[f64]| v.iter().all(|a| a.is_finite());
        match self {
            Shape::Ellipsoid { center, factor } => {
                check_factor(factor, center.len())?;
                if !finite(center) {
                    return invalid("ellipsoid center must be finite");
                }
            }
            Shape::DiagEllipsoid { center, variances } => {
                if variances.len() != center.len() || !finite(center) {
                    return invalid("diagonal ellipsoid dimensions disagree");
                }
                if variances.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::DegenerateShape("variances must be positive".into()));
                }
            }
            Shape::Ball { center } => {
                if !finite(center) {
                    return invalid("ball center must be finite");
                }
            }
            Shape::Polytope {
                normals,
                offsets,
                interior,
            } => {
                if normals.is_empty() || normals.len() != offsets.len() {
                    return invalid("polytope needs matching non-empty normals and offsets");
                }
                if normals.iter().any(|a| a.len() != m || !finite(a)) || !finite(offsets) {
                    return invalid("polytope normals have inconsistent length or non-finite data");
                }
                for (a, &b) in normals.iter().zip(offsets) {
                    let slack = b - dot(a, interior);
                    if !(slack > INTERIOR_TOL * b.abs().max(1.0)) {
                        return Err(Error::DegeneratePolytope(
                            "interior point is not strictly inside every half-space".into(),
                        ));
                    }
                }
            }
            Shape::PcaEllipsoid {
                projection,
                center,
                factor,
            } => {
                if projection.len() != center.len() || projection.iter().any(|p| p.len() != m) {
                    return invalid("projection must have one row per reduced coordinate");
                }
                check_factor(factor, center.len())?;
            }
            Shape::Union(parts) | Shape::Intersection(parts) => {
                if parts.is_empty() {
                    return invalid(format!("{} needs at least one component", self.name()));
                }
                for p in parts {
                    if !p.is_basic() && !matches!(p, Shape::Projected { .. }) {
                        return invalid("union and intersection components must be basic shapes");
                    }
                    if p.dim() != m {
                        return invalid("components have different dimensions");
                    }
                    p.validate()?;
                }
            }
            Shape::BoxGrid {
                centers,
                half_width,
            } => {
                if !(*half_width > 0.0) || centers.iter().any(|c| c.len() != m || !finite(c)) {
                    return invalid("box grid needs a positive half-width and consistent centers");
                }
            }
            Shape::ScaledHalfspaces {
                normals,
                offsets,
                scales,
            } => {
                if normals.len() != offsets.len() || normals.len() != scales.len() {
                    return invalid("half-space lists have different lengths");
                }
                if normals.iter().any(|a| a.len() != m) {
                    return invalid("half-space normals have inconsistent length");
                }
                if scales.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
                    return Err(Error::InvalidScale("scales must be positive".into()));
                }
            }
            Shape::Projected { offset, dim, shape } => {
                if !shape.is_basic() && !matches!(**shape, Shape::Union(_)) {
                    return invalid("projected shapes must be basic or a union");
                }
                if offset + shape.dim() > *dim {
                    return invalid("projected block exceeds the ambient dimension");
                }
                shape.validate()?;
            }
        }
        Ok(())
    }

    /// Evaluates the transform, checking the dimension of `xi`.
    pub fn transform(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dim() {
            return invalid(format!(
                "point has dimension {} but the shape expects {}",
                xi.len(),
                self.dim()
            ));
        }
        Ok(self.transform_unchecked(xi))
    }

    fn transform_unchecked(&self, xi: &[f64]) -> f64 {
        match self {
            Shape::Ellipsoid { center, factor } => mahalanobis_sq(factor, &sub(xi, center)),
            Shape::DiagEllipsoid { center, variances } => xi
                .iter()
                .zip(center)
                .zip(variances)
                .map(|((x, c), v)| (x - c) * (x - c) / v)
                .sum(),
            Shape::Ball { center } => xi.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum(),
            Shape::Polytope {
                normals,
                offsets,
                interior,
            } => {
                let d = sub(xi, interior);
                normals
                    .iter()
                    .zip(offsets)
                    .map(|(a, b)| dot(a, &d) / (b - dot(a, interior)))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            Shape::PcaEllipsoid {
                projection,
                center,
                factor,
            } => {
                let y: Vec<f64> = projection
                    .iter()
                    .zip(center)
                    .map(|(p, c)| dot(p, xi) - c)
                    .collect();
                mahalanobis_sq(factor, &y)
            }
            Shape::Union(parts) => parts
                .iter()
                .map(|p| p.transform_unchecked(xi))
                .fold(f64::INFINITY, f64::min),
            Shape::Intersection(parts) => parts
                .iter()
                .map(|p| p.transform_unchecked(xi))
                .fold(f64::NEG_INFINITY, f64::max),
            Shape::BoxGrid {
                centers,
                half_width,
            } => centers
                .iter()
                .map(|c| {
                    xi.iter()
                        .zip(c)
                        .map(|(x, y)| (x - y).abs())
                        .fold(0.0, f64::max)
                        / half_width
                })
                .fold(f64::INFINITY, f64::min),
            Shape::ScaledHalfspaces {
                normals,
                offsets,
                scales,
            } => normals
                .iter()
                .zip(offsets)
                .zip(scales)
                .map(|((a, b), k)| (dot(a, xi) - b) / k)
                .fold(f64::NEG_INFINITY, f64::max),
            Shape::Projected { offset, shape, .. } => {
                shape.transform_unchecked(&xi[*offset..*offset + shape.dim()])
            }
        }
    }

    /// Lower-triangular factor `L` with `S = L L'` for the ellipsoidal variants.
    pub fn ellipsoid_factor(&self) -> Option<(Vec<f64>, DMatrix<f64>)> {
        match self {
            Shape::Ellipsoid { center, factor } => Some((center.clone(), lower_factor(factor))),
            Shape::DiagEllipsoid { center, variances } => Some((
                center.clone(),
                DMatrix::from_diagonal(&DVector::from_iterator(
                    variances.len(),
                    variances.iter().map(|v| v.sqrt()),
                )),
            )),
            Shape::Ball { center } => Some((
                center.clone(),
                DMatrix::identity(center.len(), center.len()),
            )),
            _ => None,
        }
    }
}

fn check_factor(factor: &[Vec<f64>], m: usize) -> Result<()> {
    if factor.len() != m || factor.iter().enumerate().any(|(i, r)| r.len() < i + 1) {
        return invalid("factor must be a lower-triangular matrix given by rows");
    }
    if factor.iter().flatten().any(|v| !v.is_finite()) {
        return invalid("factor must be finite");
    }
    if (0..m).any(|i| !(factor[i][i] > 0.0)) {
        return Err(Error::DegenerateShape(
            "factor must have a positive diagonal".into(),
        ));
    }
    Ok(())
}

/// Transform of `shape` at `xi`.
pub fn transform_eval(shape: &Shape, xi: &[f64]) -> Result<f64> {
    shape.transform(xi)
}

/// Largest inscribed ball `{z + r u : ||u|| <= 1}` of `{xi : a_i' xi <= b_i}`, found by
/// the linear program `max r s.t. a_i' z + r ||a_i|| <= b_i, r >= 0`.
pub fn chebyshev_ball(normals: &[Vec<f64>], offsets: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = normals.first().map_or(0, Vec::len);
    if m == 0 || normals.len() != offsets.len() || normals.iter().any(|a| a.len() != m) {
        return invalid("half-spaces must be non-empty with consistent dimensions");
    }
    let mut b = ProgramBuilder::new();
    let z = b.new_vars(m);
    let r = b.new_var();
    b.set_cost(r, -1.0);
    for (a, &off) in normals.iter().zip(offsets) {
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut lhs = Affine::default();
        for (j, &v) in a.iter().enumerate() {
            lhs.add_term(z[j], v);
        }
        lhs.add_term(r, norm);
        b.add_le(&lhs, &Affine::constant(off));
    }
    b.add_nonneg(Affine::var(r));
    let sol = solve(&b.build(), &SolverSettings::default())?;
    match sol.status {
        SolveStatus::Optimal => {
            let radius = sol.x[r];
            let scale = offsets.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
            if radius <= 1e-9 * scale {
                return Err(Error::DegeneratePolytope(
                    "polytope has an empty interior".into(),
                ));
            }
            Ok((sol.x[..m].to_vec(), radius))
        }
        SolveStatus::Infeasible => Err(Error::DegeneratePolytope("polytope is empty".into())),
        SolveStatus::Unbounded => Err(Error::DegeneratePolytope("polytope is unbounded".into())),
        other => Err(Error::DegeneratePolytope(format!(
            "center problem ended with status {other:?}"
        ))),
    }
}

/// Chebyshev center of a polytope shape.
pub fn chebyshev_center(shape: &Shape) -> Result<Vec<f64>> {
    match shape {
        Shape::Polytope {
            normals, offsets, ..
        } => chebyshev_ball(normals, offsets).map(|(z, _)| z),
        other => invalid(format!(
            "chebyshev center needs a polytope, got {}",
            other.name()
        )),
    }
}

/// A shape with a size: the set `{xi : t(xi) <= size}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub shape: Shape,
    pub size: f64,
    /// Calibration details, absent when the size was set directly.
    pub calib: Option<CalibResult>,
}

impl PredictionSet {
    /// A set with a given size and no calibration record.
    pub fn with_size(shape: Shape, size: f64) -> Self {
        PredictionSet {
            shape,
            size,
            calib: None,
        }
    }

    pub fn contains(&self, xi: &[f64]) -> Result<bool> {
        Ok(self.shape.transform(xi)? <= self.size)
    }
}

/// Transform values of every row of `data`.
pub fn transform_values(shape: &Shape, data: &Dataset) -> Result<Vec<f64>> {
    if data.m() != shape.dim() {
        return invalid(format!(
            "data dimension {} differs from shape dimension {}",
            data.m(),
            shape.dim()
        ));
    }
    Ok(data.rows().map(|r| shape.transform_unchecked(r)).collect())
}

/// Sizes `shape` on Phase-2 data by order-statistic calibration.
pub fn build_prediction_set(
    shape: Shape,
    phase2: &Dataset,
    epsilon: f64,
    delta: f64,
) -> Result<PredictionSet> {
    shape.validate()?;
    let values = transform_values(&shape, phase2)?;
    let calib = calibrate_size(&values, epsilon, delta)?;
    Ok(PredictionSet {
        shape,
        size: calib.s,
        calib: Some(calib),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_examples() {
        let e = Shape::Ellipsoid {
            center: vec![0.0, 0.0],
            factor: vec![vec![1.0], vec![0.0, 1.0]],
        };
        assert_eq!(e.transform(&[3.0, 4.0]).unwrap(), 25.0);
        let boxp = Shape::Polytope {
            normals: vec![
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
            ],
            offsets: vec![1.0; 4],
            interior: vec![0.0, 0.0],
        };
        assert_eq!(boxp.transform(&[0.5, -0.25]).unwrap(), 0.5);
        let u = Shape::Union(vec![
            Shape::Ball {
                center: vec![0.0, 0.0],
            },
            Shape::Ball {
                center: vec![10.0, 0.0],
            },
        ]);
        assert_eq!(u.transform(&[5.0, 0.0]).unwrap(), 25.0);
        assert!(matches!(
            u.transform(&[1.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn chebyshev_examples() {
        let (z, r) = chebyshev_ball(
            &[
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
            ],
            &[1.0; 4],
        )
        .unwrap();
        assert!(z[0].abs() < 1e-7 && z[1].abs() < 1e-7 && (r - 1.0).abs() < 1e-7);
        let (z, _) = chebyshev_ball(
            &[vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]],
            &[0.0, 0.0, 1.0],
        )
        .unwrap();
        let c = 0.292_893_218_813_452_5;
        assert!((z[0] - c).abs() < 1e-7 && (z[1] - c).abs() < 1e-7, "{z:?}");
        assert!(matches!(
            chebyshev_ball(&[vec![1.0], vec![-1.0]], &[-1.0, -1.0]),
            Err(Error::DegeneratePolytope(_))
        ));
    }

    #[test]
    fn nested_unions_are_rejected() {
        let ball = Shape::Ball { center: vec![0.0] };
        let inner = Shape::Union(vec![ball.clone()]);
        assert!(Shape::Union(vec![inner]).validate().is_err());
        assert!(Shape::Union(vec![ball]).validate().is_ok());
    }

    #[test]
    fn json_round_trip() {
        let s = Shape::Intersection(vec![
            Shape::Projected {
                offset: 0,
                dim: 3,
                shape: Box::new(Shape::DiagEllipsoid {
                    center: vec![0.1, 1.0 / 3.0],
                    variances: vec![2.0, 1e-7],
                }),
            },
            Shape::Projected {
                offset: 2,
                dim: 3,
                shape: Box::new(Shape::Ball { center: vec![-0.7] }),
            },
        ]);
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"variant\":\"intersection\""));
        let back: Shape = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(s.transform(&[0.1, 1.0 / 3.0, 0.3]).unwrap(), 1.0);
    }
}
