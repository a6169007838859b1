//! Robust solves and the reconstruction pipeline.

use serde::{Deserialize, Serialize};

use crate::conic::{solve, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::model::{dot, CcpSpec, DataSplit, Dataset};
use crate::reformulate::{assemble_ro, build_reconstruction_set, covering_size};
use crate::shapes::{
    ball_basis, block_ellipsoids, cluster_union, fit_ellipsoid, fit_polytope_box, grid_histogram,
    pca_ellipsoid, EllipsoidMode, PredictionSet, Shape,
};

fn default_ridge() -> f64 {
    1e-8
}

/// How the Phase-1 shape is learned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShapeConfig {
    Ellipsoid {
        mode: EllipsoidMode,
        #[serde(default = "default_ridge")]
        ridge: f64,
    },
    /// Separate ellipsoids on equal coordinate blocks (one per constraint row).
    BlockEllipsoids {
        blocks: usize,
        mode: EllipsoidMode,
        #[serde(default = "default_ridge")]
        ridge: f64,
    },
    PolytopeBox,
    Clusters {
        k: usize,
        mode: EllipsoidMode,
        #[serde(default = "default_ridge")]
        ridge: f64,
    },
    Pca {
        variance_keep: f64,
        #[serde(default = "default_ridge")]
        ridge: f64,
    },
    BallBasis,
    Grid {
        width: f64,
    },
}

/// Learns the configured shape on Phase-1 data; `seed` drives clustering.
pub fn fit_shape(config: &ShapeConfig, phase1: &Dataset, seed: u64) -> Result<Shape> {
    match *config {
        ShapeConfig::Ellipsoid { mode, ridge } => fit_ellipsoid(phase1, mode, ridge),
        ShapeConfig::BlockEllipsoids {
            blocks,
            mode,
            ridge,
        } => block_ellipsoids(phase1, blocks, mode, ridge),
        ShapeConfig::PolytopeBox => fit_polytope_box(phase1),
        ShapeConfig::Clusters { k, mode, ridge } => cluster_union(phase1, k, mode, ridge, seed),
        ShapeConfig::Pca {
            variance_keep,
            ridge,
        } => pca_ellipsoid(phase1, variance_keep, ridge),
        ShapeConfig::BallBasis => ball_basis(phase1),
        ShapeConfig::Grid { width } => grid_histogram(phase1, width),
    }
}

/// Decision and objective of a robust solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustSolve {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Assembles and solves the robust counterpart over `set`. Conic families with matrix
/// cones come back as [`SolveStatus::ExportOnly`].
pub fn solve_robust(spec: &CcpSpec, set: &PredictionSet) -> Result<RobustSolve> {
    let rp = assemble_ro(spec, set)?;
    let d = spec.d();
    if rp.export_only {
        return Ok(RobustSolve {
            status: SolveStatus::ExportOnly,
            x: vec![f64::NAN; d],
            objective: f64::NAN,
        });
    }
    let sol = solve(&rp.program, &SolverSettings::default())?;
    Ok(RobustSolve {
        status: sol.status,
        x: rp.decision(&sol.x),
        objective: sol.primal_objective,
    })
}

/// Scale assigned to each constraint row of the reconstructed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalePolicy {
    /// `k_j = b_j - mean_j' x_hat` with the Phase-1 mean of row `j`; a row whose value is
    /// not positive falls back to [`ScalePolicy::StdDev`].
    #[default]
    RhsGap,
    /// `k_j` is the Phase-1 standard deviation of `a_j' x_hat`.
    StdDev,
}

/// Everything the reconstruction pipeline produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionOutcome {
    pub initial_status: SolveStatus,
    pub x_hat: Vec<f64>,
    pub initial_objective: f64,
    pub scales: Vec<f64>,
    /// Rows whose gap scale was not positive and used the standard deviation instead.
    pub fallback_rows: Vec<usize>,
    /// Calibrated size of the reconstructed set.
    pub rho: Option<f64>,
    /// Solve over the reconstructed set as returned by the solver, before the incumbent
    /// is substituted for a worse or failed result.
    pub rebuilt: Option<RobustSolve>,
    pub status: SolveStatus,
    pub x_tilde: Vec<f64>,
    pub objective: f64,
}

fn row_values(spec: &CcpSpec, data: &Dataset, x: &[f64], row: usize) -> Vec<f64> {
    let d = spec.d();
    data.rows()
        .map(|xi| dot(&xi[row * d..(row + 1) * d], x))
        .collect()
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
}

/// Per-row scales for the reconstructed set and the rows that fell back.
pub fn reconstruction_scales(
    spec: &CcpSpec,
    phase1: &Dataset,
    x_hat: &[f64],
    policy: ScalePolicy,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let mut scales = Vec::new();
    let mut fallback = Vec::new();
    for (j, &b) in spec.rhs.iter().enumerate() {
        let values = row_values(spec, phase1, x_hat, j);
        let gap = b - values.iter().sum::<f64>() / values.len() as f64;
        let k = match policy {
            ScalePolicy::RhsGap if gap > 0.0 && gap.is_finite() => gap,
            ScalePolicy::RhsGap => {
                fallback.push(j);
                std_dev(&values)
            }
            ScalePolicy::StdDev => std_dev(&values),
        };
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidScale(format!("row {j} has scale {k}")));
        }
        scales.push(k);
    }
    Ok((scales, fallback))
}

/// Solves the robust program over a Phase-1 shape sized to cover `1 - eps` of Phase 1,
/// rebuilds the set around that incumbent with a size calibrated on Phase 2, and solves
/// again. When the calibrated size is not positive the incumbent stays feasible, and the
/// better of the two points is returned.
pub fn reconstruction_pipeline(
    split: &DataSplit,
    spec: &CcpSpec,
    shape: &ShapeConfig,
    policy: ScalePolicy,
    seed: u64,
) -> Result<ReconstructionOutcome> {
    spec.validate()?;
    let fitted = fit_shape(shape, &split.phase1, seed)?;
    let size = covering_size(&fitted, &split.phase1, spec.epsilon)?;
    let initial = solve_robust(spec, &PredictionSet::with_size(fitted, size))?;
    let mut out = ReconstructionOutcome {
        initial_status: initial.status,
        x_hat: initial.x.clone(),
        initial_objective: initial.objective,
        scales: Vec::new(),
        fallback_rows: Vec::new(),
        rho: None,
        rebuilt: None,
        status: initial.status,
        x_tilde: initial.x.clone(),
        objective: initial.objective,
    };
    if initial.status != SolveStatus::Optimal {
        return Ok(out);
    }
    let (scales, fallback) = reconstruction_scales(spec, &split.phase1, &initial.x, policy)?;
    let set = build_reconstruction_set(
        &initial.x,
        spec,
        &scales,
        &split.phase2,
        spec.epsilon,
        spec.delta,
    )?;
    let rho = set.size;
    let rebuilt = solve_robust(spec, &set)?;
    out.scales = scales;
    out.fallback_rows = fallback;
    out.rho = Some(rho);
    out.status = rebuilt.status;
    out.x_tilde = rebuilt.x.clone();
    out.objective = rebuilt.objective;
    out.rebuilt = Some(rebuilt);
    if rho <= 0.0 && (out.status != SolveStatus::Optimal || out.objective > initial.objective) {
        out.status = SolveStatus::Optimal;
        out.x_tilde = initial.x;
        out.objective = initial.objective;
    }
    Ok(out)
}
