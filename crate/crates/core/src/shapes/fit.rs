//! Phase-1 shape fitting.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, SymmetricEigen};

use super::{chebyshev_ball, kmeans, Shape};
use crate::error::{invalid, Error, Result};
use crate::model::{dot, Dataset};

/// Upper bound on the number of cells a histogram grid may span.
pub const GRID_BOX_LIMIT: usize = 1_000_000;

/// Covariance structure used by [`fit_ellipsoid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EllipsoidMode {
    Full,
    Diag,
    Ball,
}

impl std::str::FromStr for EllipsoidMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(EllipsoidMode::Full),
            "diag" => Ok(EllipsoidMode::Diag),
            "ball" => Ok(EllipsoidMode::Ball),
            other => invalid(format!("unknown ellipsoid mode {other:?}")),
        }
    }
}

/// Adds `ridge * tr(S)/m * I` when the smallest eigenvalue is at most that amount.
fn regularize(cov: &mut DMatrix<f64>, ridge: f64) -> Result<()> {
    let m = cov.nrows();
    let level = ridge * cov.trace() / m as f64;
    if !(cov.trace() > 0.0) {
        return Err(Error::DegenerateData("covariance has zero trace".into()));
    }
    let min_eig = SymmetricEigen::new(cov.clone()).eigenvalues.min();
    if min_eig <= level {
        for i in 0..m {
            cov[(i, i)] += level;
        }
    }
    Ok(())
}

fn cholesky_rows(cov: DMatrix<f64>) -> Result<Vec<Vec<f64>>> {
    let l = cov
        .cholesky()
        .ok_or_else(|| Error::DegenerateData("covariance is not positive definite".into()))?
        .l();
    Ok((0..l.nrows())
        .map(|i| (0..=i).map(|j| l[(i, j)]).collect())
        .collect())
}

/// Ellipsoid centered at the sample mean with the sample covariance, its diagonal, or the
/// identity as shape matrix.
pub fn fit_ellipsoid(phase1: &Dataset, mode: EllipsoidMode, ridge: f64) -> Result<Shape> {
    if phase1.is_empty() {
        return invalid("cannot fit an ellipsoid to an empty dataset");
    }
    if !(ridge >= 0.0) {
        return invalid("ridge must be nonnegative");
    }
    let center = phase1.mean();
    match mode {
        EllipsoidMode::Ball => Ok(Shape::Ball { center }),
        EllipsoidMode::Full => {
            let mut cov = phase1.covariance();
            regularize(&mut cov, ridge)?;
            Ok(Shape::Ellipsoid {
                center,
                factor: cholesky_rows(cov)?,
            })
        }
        EllipsoidMode::Diag => {
            let cov = phase1.covariance();
            let mut diag = DMatrix::from_diagonal(&cov.diagonal());
            regularize(&mut diag, ridge)?;
            let variances: Vec<f64> = diag.diagonal().iter().copied().collect();
            if variances.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::DegenerateData(
                    "a coordinate has zero variance".into(),
                ));
            }
            Ok(Shape::DiagEllipsoid { center, variances })
        }
    }
}

/// Axis-aligned bounding box of the data as `2m` half-spaces (`+e_i` then `-e_i` for each
/// coordinate), with the box center as interior point.
pub fn fit_polytope_box(phase1: &Dataset) -> Result<Shape> {
    if phase1.n() < 2 {
        return invalid("a bounding box needs at least two points");
    }
    let m = phase1.m();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for r in phase1.rows() {
        for j in 0..m {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    let mut normals = Vec::with_capacity(2 * m);
    let mut offsets = Vec::with_capacity(2 * m);
    for j in 0..m {
        if !(hi[j] > lo[j]) {
            return Err(Error::DegenerateData(format!(
                "coordinate {j} has zero width"
            )));
        }
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        normals.push(e.clone());
        offsets.push(hi[j]);
        e[j] = -1.0;
        normals.push(e);
        offsets.push(-lo[j]);
    }
    let interior = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let shape = Shape::Polytope {
        normals,
        offsets,
        interior,
    };
    shape.validate()?;
    Ok(shape)
}

/// Polytope from user-supplied half-spaces `a_i' xi <= b_i`. Without an interior point the
/// Chebyshev center is used.
pub fn polytope_from_halfspaces(
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    interior: Option<Vec<f64>>,
) -> Result<Shape> {
    let interior = match interior {
        Some(p) => p,
        None => chebyshev_ball(&normals, &offsets)?.0,
    };
    let shape = Shape::Polytope {
        normals,
        offsets,
        interior,
    };
    shape.validate()?;
    Ok(shape)
}

/// Intersection of ellipsoids fitted separately on `blocks` equal-width coordinate blocks,
/// so the transform is the largest per-block transform.
pub fn block_ellipsoids(
    phase1: &Dataset,
    blocks: usize,
    mode: EllipsoidMode,
    ridge: f64,
) -> Result<Shape> {
    let m = phase1.m();
    if blocks == 0 || m % blocks != 0 {
        return invalid(format!(
            "cannot split dimension {m} into {blocks} equal blocks"
        ));
    }
    if blocks == 1 {
        return fit_ellipsoid(phase1, mode, ridge);
    }
    let w = m / blocks;
    let mut parts = Vec::with_capacity(blocks);
    for j in 0..blocks {
        let rows: Vec<Vec<f64>> = phase1
            .rows()
            .map(|r| r[j * w..(j + 1) * w].to_vec())
            .collect();
        let sub = if rows.is_empty() {
            Dataset::empty(w)
        } else {
            Dataset::from_rows(&rows)?
        };
        parts.push(Shape::Projected {
            offset: j * w,
            dim: m,
            shape: Box::new(fit_ellipsoid(&sub, mode, ridge)?),
        });
    }
    Ok(Shape::Intersection(parts))
}

/// Union of per-cluster ellipsoids from k-means. With `k = 1` this is the single
/// ellipsoid of [`fit_ellipsoid`].
pub fn cluster_union(
    phase1: &Dataset,
    k: usize,
    mode: EllipsoidMode,
    ridge: f64,
    seed: u64,
) -> Result<Shape> {
    if k == 1 {
        return fit_ellipsoid(phase1, mode, ridge);
    }
    let km = kmeans(phase1, k, seed)?;
    let mut parts = Vec::with_capacity(k);
    for j in 0..k {
        let members: Vec<usize> = (0..phase1.n()).filter(|&i| km.labels[i] == j).collect();
        if members.len() < 2 {
            return Err(Error::ClusterDegeneracy {
                cluster: j,
                size: members.len(),
                k,
            });
        }
        parts.push(fit_ellipsoid(&phase1.select(&members), mode, ridge)?);
    }
    Ok(Shape::Union(parts))
}

/// Ellipsoid on the leading principal components capturing at least `variance_keep` of
/// the total variance.
pub fn pca_ellipsoid(phase1: &Dataset, variance_keep: f64, ridge: f64) -> Result<Shape> {
    if phase1.n() < 2 {
        return invalid("principal components need at least two points");
    }
    if !(variance_keep > 0.0 && variance_keep <= 1.0) {
        return invalid("variance_keep must lie in (0, 1]");
    }
    let m = phase1.m();
    let eig = SymmetricEigen::new(phase1.covariance());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateData("data have zero variance".into()));
    }
    let mut r = 0;
    let mut acc = 0.0;
    while r < m {
        acc += values[r];
        r += 1;
        if acc >= variance_keep * total - 1e-12 * total {
            break;
        }
    }
    let projection: Vec<Vec<f64>> = order[..r]
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            // fix the sign so the largest entry is positive
            let lead = v
                .iter()
                .copied()
                .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            if lead < 0.0 {
                v.iter_mut().for_each(|a| *a = -*a);
            }
            v
        })
        .collect();
    let reduced: Vec<Vec<f64>> = phase1
        .rows()
        .map(|row| projection.iter().map(|p| dot(p, row)).collect())
        .collect();
    let reduced = Dataset::from_rows(&reduced)?;
    let center = reduced.mean();
    let mut cov = reduced.covariance();
    regularize(&mut cov, ridge)?;
    Ok(Shape::PcaEllipsoid {
        projection,
        center,
        factor: cholesky_rows(cov)?,
    })
}

/// Union of balls centered at every Phase-1 point.
pub fn ball_basis(phase1: &Dataset) -> Result<Shape> {
    if phase1.is_empty() {
        return invalid("ball basis needs at least one point");
    }
    Ok(Shape::Union(
        phase1
            .rows()
            .map(|r| Shape::Ball { center: r.to_vec() })
            .collect(),
    ))
}

/// Occupied cells of a grid of side `width` anchored at the coordinate-wise minimum.
pub fn grid_histogram(phase1: &Dataset, width: f64) -> Result<Shape> {
    if !(width > 0.0 && width.is_finite()) {
        return invalid("grid width must be positive");
    }
    if phase1.is_empty() {
        return invalid("grid histogram needs at least one point");
    }
    let m = phase1.m();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for r in phase1.rows() {
        for j in 0..m {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    let boxes: f64 = (0..m)
        .map(|j| ((hi[j] - lo[j]) / width).floor() + 1.0)
        .product();
    if boxes > GRID_BOX_LIMIT as f64 {
        return Err(Error::TooFineGrid {
            boxes,
            limit: GRID_BOX_LIMIT,
        });
    }
    let cells: BTreeSet<Vec<i64>> = phase1
        .rows()
        .map(|r| {
            (0..m)
                .map(|j| ((r[j] - lo[j]) / width).floor() as i64)
                .collect()
        })
        .collect();
    let centers = cells
        .iter()
        .map(|c| {
            (0..m)
                .map(|j| lo[j] + (c[j] as f64 + 0.5) * width)
                .collect()
        })
        .collect();
    Ok(Shape::BoxGrid {
        centers,
        half_width: width / 2.0,
    })
}
