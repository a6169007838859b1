//! Robust counterparts: rewriting a robust program over a learned uncertainty set as a
//! conic program.
//!
//! Every uncertain linear row is handled in the generic form
//! `sup_{xi in U} xi' y <= rhs`, where `y` is a vector of affine forms in the decision
//! variables (for a row of a joint constraint, `x` placed in the block of that row and
//! zeros elsewhere) and `rhs` is affine. Ellipsoids become one second-order cone,
//! polytopes a dual vector with linear rows, unions one copy per component and
//! coordinate partitions one counterpart per block.

mod linear;
mod lmi;
mod reconstruct;
mod worst;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conic::{Affine, ConicProgram, ProgramBuilder};
use crate::error::{invalid, Error, Result};
use crate::model::{quadratic_parts, sdp_blocks, CcpSpec, ConstraintFamily};
use crate::shapes::{PredictionSet, Shape};

pub use linear::{rc_linear_ellipsoid, rc_linear_polytope, rc_linear_vecnorm, rc_pca};
pub use lmi::{rc_quadratic_ellipsoid, rc_sdp_normbounded, QuadraticTerm, SymAffineMatrix};
pub use reconstruct::{build_reconstruction_set, covering_size};
pub use worst::worst_case_lhs;

/// What a conic variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum VarRole {
    /// Original decision variable `x_index`.
    Decision { index: usize },
    /// Dual multiplier of a polytope facet.
    PolytopeDual { row: usize, facet: usize },
    /// Coordinate of the reduced-space direction of a principal-component counterpart.
    PcaDirection { row: usize, component: usize },
    /// Norm bound of a principal-component counterpart.
    PcaNorm { row: usize },
    /// Worst-case contribution of one block of a coordinate partition.
    BlockEpigraph { row: usize, block: usize },
    /// Slack of a matrix inequality.
    LmiSlack { row: usize },
}

/// A robust program in conic form together with the meaning of its variables.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustProgram {
    pub spec: CcpSpec,
    pub set: PredictionSet,
    pub program: ConicProgram,
    pub roles: Vec<VarRole>,
    /// Set when the program contains PSD blocks.
    pub export_only: bool,
}

impl RobustProgram {
    /// Decision part of a full conic solution vector.
    pub fn decision(&self, z: &[f64]) -> Vec<f64> {
        z[..self.spec.d()].to_vec()
    }
}

/// Conic program under construction with role bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct RobustBuilder {
    pub builder: ProgramBuilder,
    pub roles: Vec<VarRole>,
    row: usize,
}

impl RobustBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with the given role.
    pub fn var(&mut self, role: VarRole) -> usize {
        self.roles.push(role);
        self.builder.new_var()
    }

    /// Adds the decision variables `x_0 .. x_{d-1}` (must be called first).
    pub fn decision_vars(&mut self, d: usize) -> Vec<usize> {
        (0..d)
            .map(|index| self.var(VarRole::Decision { index }))
            .collect()
    }

    /// Index of the protected row currently being emitted, recorded in auxiliary roles.
    pub fn set_row(&mut self, row: usize) {
        self.row = row;
    }

    pub fn row(&self) -> usize {
        self.row
    }
}

fn is_zero(e: &Affine) -> bool {
    e.constant == 0.0 && e.is_constant()
}

/// Adds `sup_{xi : t(xi) <= size} xi' y <= rhs` for the given shape.
pub fn robust_le(
    rb: &mut RobustBuilder,
    shape: &Shape,
    size: f64,
    y: &[Affine],
    rhs: &Affine,
) -> Result<()> {
    if y.len() != shape.dim() {
        return invalid(format!(
            "uncertain row has {} coefficients but the set has dimension {}",
            y.len(),
            shape.dim()
        ));
    }
    match shape {
        Shape::Ellipsoid { .. } | Shape::DiagEllipsoid { .. } | Shape::Ball { .. } => {
            let (center, factor) = shape.ellipsoid_factor().expect("ellipsoidal variant");
            rc_linear_ellipsoid(rb, &center, &factor, size.max(0.0).sqrt(), y, rhs);
            Ok(())
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
                    let base = crate::model::dot(a, interior);
                    base + size * (b - base)
                })
                .collect();
            rc_linear_polytope(rb, normals, &e, y, rhs);
            Ok(())
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
            rc_linear_polytope(rb, normals, &e, y, rhs);
            Ok(())
        }
        Shape::BoxGrid {
            centers,
            half_width,
        } => {
            let m = shape.dim();
            let mut normals = Vec::with_capacity(2 * m);
            for j in 0..m {
                let mut e = vec![0.0; m];
                e[j] = 1.0;
                normals.push(e.clone());
                e[j] = -1.0;
                normals.push(e);
            }
            let radius = size * half_width;
            for c in centers {
                let e: Vec<f64> = (0..m)
                    .flat_map(|j| [c[j] + radius, -c[j] + radius])
                    .collect();
                rc_linear_polytope(rb, &normals, &e, y, rhs);
            }
            Ok(())
        }
        Shape::PcaEllipsoid {
            projection,
            center,
            factor,
        } => rc_pca(rb, projection, center, factor, size, y, rhs),
        Shape::Union(parts) => {
            for p in parts {
                robust_le(rb, p, size, y, rhs)?;
            }
            Ok(())
        }
        Shape::Projected { offset, shape, .. } => {
            let k = shape.dim();
            for (i, e) in y.iter().enumerate() {
                if (i < *offset || i >= offset + k) && !is_zero(e) {
                    // coordinates outside the block are unrestricted
                    rb.builder.add_zero(e.clone());
                }
            }
            robust_le(rb, shape, size, &y[*offset..offset + k], rhs)
        }
        Shape::Intersection(parts) => rc_intersection(rb, parts, size, y, rhs),
    }
}

fn block_of(shape: &Shape) -> Option<(usize, usize)> {
    match shape {
        Shape::Projected { offset, shape, .. } => Some((*offset, shape.dim())),
        _ => None,
    }
}

fn polyhedral_rows(shape: &Shape, size: f64) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
    match shape {
        Shape::Polytope {
            normals,
            offsets,
            interior,
        } => Some((
            normals.clone(),
            normals
                .iter()
                .zip(offsets)
                .map(|(a, b)| {
                    let base = crate::model::dot(a, interior);
                    base + size * (b - base)
                })
                .collect(),
        )),
        Shape::ScaledHalfspaces {
            normals,
            offsets,
            scales,
        } => Some((
            normals.clone(),
            offsets
                .iter()
                .zip(scales)
                .map(|(b, k)| b + size * k)
                .collect(),
        )),
        _ => None,
    }
}

/// Intersections are supported when the components live on disjoint coordinate blocks
/// (the worst case is then the sum of the block worst cases) or are all polyhedral.
fn rc_intersection(
    rb: &mut RobustBuilder,
    parts: &[Shape],
    size: f64,
    y: &[Affine],
    rhs: &Affine,
) -> Result<()> {
    let blocks: Option<Vec<(usize, usize)>> = parts.iter().map(block_of).collect();
    if let Some(blocks) = blocks {
        let mut sorted = blocks.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0].0 + w[0].1 > w[1].0) {
            return invalid("partition blocks overlap");
        }
        let touched: Vec<usize> = (0..parts.len())
            .filter(|&i| {
                let (o, k) = blocks[i];
                y[o..o + k].iter().any(|e| !is_zero(e))
            })
            .collect();
        let covered = |i: usize| blocks.iter().any(|&(o, k)| i >= o && i < o + k);
        for (i, e) in y.iter().enumerate() {
            if !covered(i) && !is_zero(e) {
                rb.builder.add_zero(e.clone());
            }
        }
        let inner = |p: &Shape| match p {
            Shape::Projected { shape, .. } => (**shape).clone(),
            _ => unreachable!(),
        };
        match touched.as_slice() {
            [] => {
                rb.builder.add_le(&Affine::constant(0.0), rhs);
            }
            [only] => {
                let (o, k) = blocks[*only];
                robust_le(rb, &inner(&parts[*only]), size, &y[o..o + k], rhs)?;
            }
            many => {
                let mut total = Affine::default();
                for &i in many {
                    let (o, k) = blocks[i];
                    let row = rb.row();
                    let t = rb.var(VarRole::BlockEpigraph { row, block: i });
                    robust_le(rb, &inner(&parts[i]), size, &y[o..o + k], &Affine::var(t))?;
                    total.add_term(t, 1.0);
                }
                rb.builder.add_le(&total, rhs);
            }
        }
        return Ok(());
    }
    let mut normals = Vec::new();
    let mut e = Vec::new();
    for p in parts {
        let (n, o) = polyhedral_rows(p, size).ok_or_else(|| Error::UnsupportedCombination {
            family: "linear".into(),
            shape: format!("intersection containing {}", p.name()),
            supported: "intersections of coordinate blocks or of polyhedral sets".into(),
        })?;
        normals.extend(n);
        e.extend(o);
    }
    rc_linear_polytope(rb, &normals, &e, y, rhs);
    Ok(())
}

/// Supported (family, shape) pairs, for error messages.
pub const SUPPORTED_PAIRS: &str =
    "linear families with ellipsoid, diag_ellipsoid, ball, polytope, \
pca_ellipsoid, union, intersection (coordinate partitions or polyhedral parts), box_grid, \
scaled_halfspaces; quadratic with ellipsoid, diag_ellipsoid or ball; semidefinite with ball";

fn unsupported(spec: &CcpSpec, shape: &Shape) -> Error {
    Error::UnsupportedCombination {
        family: spec.family.name().into(),
        shape: shape.name().into(),
        supported: SUPPORTED_PAIRS.into(),
    }
}

/// Builds the robust counterpart of `spec` over the prediction set.
pub fn assemble_ro(spec: &CcpSpec, set: &PredictionSet) -> Result<RobustProgram> {
    spec.validate()?;
    set.shape.validate()?;
    if set.shape.dim() != spec.data_dim() {
        return invalid(format!(
            "set dimension {} does not match the data dimension {} of the {} family",
            set.shape.dim(),
            spec.data_dim(),
            spec.family.name()
        ));
    }
    let d = spec.d();
    let mut rb = RobustBuilder::new();
    let x = rb.decision_vars(d);
    for (j, &c) in spec.objective.iter().enumerate() {
        rb.builder.set_cost(x[j], c);
    }
    for dc in &spec.det_constraints {
        let lhs = Affine::from_terms(
            0.0,
            x.iter().zip(&dc.coeffs).map(|(&v, &c)| (v, c)).collect(),
        );
        rb.builder.add_le(&lhs, &Affine::constant(dc.rhs));
    }
    let mut export_only = false;
    match &spec.family {
        ConstraintFamily::SingleLinear | ConstraintFamily::JointLinear { .. } => {
            let m = spec.data_dim();
            for (row, &b) in spec.rhs.iter().enumerate() {
                rb.set_row(row);
                let mut y = vec![Affine::default(); m];
                for (t, &v) in x.iter().enumerate() {
                    y[row * d + t] = Affine::var(v);
                }
                robust_le(&mut rb, &set.shape, set.size, &y, &Affine::constant(b))?;
            }
        }
        ConstraintFamily::Quadratic => {
            let (center, factor) = set
                .shape
                .ellipsoid_factor()
                .ok_or_else(|| unsupported(spec, &set.shape))?;
            let rho = set.size.max(0.0).sqrt();
            let part = |v: &[f64]| {
                let (a, b, c) = quadratic_parts(v, d);
                QuadraticTerm { a, b, c }
            };
            let directions: Vec<QuadraticTerm> = (0..factor.ncols())
                .map(|j| {
                    let col: Vec<f64> = factor.column(j).iter().map(|v| rho * v).collect();
                    part(&col)
                })
                .collect();
            let tau = rb.var(VarRole::LmiSlack { row: 0 });
            let lmi = rc_quadratic_ellipsoid(&part(&center), &directions, &x, tau)?;
            rb.builder.add_psd(lmi.side, lmi.upper);
            export_only = true;
        }
        ConstraintFamily::Semidefinite { size, b_matrix } => {
            let center = match &set.shape {
                Shape::Ball { center } => center,
                other => return Err(unsupported(spec, other)),
            };
            let p = *size;
            let b = DMatrix::from_fn(p, p, |i, j| b_matrix[i][j]);
            let lambda = rb.var(VarRole::LmiSlack { row: 0 });
            let lmi = rc_sdp_normbounded(
                &sdp_blocks(center, d, p),
                &b,
                set.size.max(0.0).sqrt(),
                &x,
                lambda,
            )?;
            rb.builder.add_psd(lmi.side, lmi.upper);
            export_only = true;
        }
    }
    Ok(RobustProgram {
        spec: spec.clone(),
        set: set.clone(),
        program: rb.builder.build(),
        roles: rb.roles,
        export_only,
    })
}
