//! Random block-diagonal joint linear instances: one consolidated ellipsoid over all rows
//! versus one ellipsoid per row sharing a max-map size, both calibrated on the same
//! Phase-2 data.

use lbro_core::conic::SolveStatus;
use lbro_core::harness::solve_robust;
use lbro_core::model::{CcpSpec, ConstraintFamily, Dataset, DetConstraint};
use lbro_core::shapes::{block_ellipsoids, build_prediction_set, EllipsoidMode, Shape};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::*;

pub struct JointCase {
    pub size_joint: f64,
    pub size_individual: f64,
    pub objective_joint: f64,
    pub objective_individual: f64,
}

fn gaussian_rows(
    rng: &mut SeededRng,
    n: usize,
    mean: &[f64],
    root: &DMatrix<f64>,
) -> Vec<Vec<f64>> {
    let m = mean.len();
    (0..n)
        .map(|_| {
            let z = DVector::from_vec(normal_vec(rng, m));
            (root * z).iter().zip(mean).map(|(a, b)| a + b).collect()
        })
        .collect()
}

/// Block-diagonal ellipsoid assembled from the per-block ellipsoids of an intersection.
pub fn consolidate(parts: &Shape) -> Shape {
    let Shape::Intersection(blocks) = parts else {
        panic!("expected an intersection of blocks");
    };
    let m = parts.dim();
    let mut center = vec![0.0; m];
    let mut factor: Vec<Vec<f64>> = (0..m).map(|i| vec![0.0; i + 1]).collect();
    for b in blocks {
        let Shape::Projected { offset, shape, .. } = b else {
            panic!("expected projected blocks");
        };
        let Shape::Ellipsoid {
            center: c,
            factor: f,
        } = shape.as_ref()
        else {
            panic!("expected full ellipsoid blocks");
        };
        center[*offset..offset + c.len()].copy_from_slice(c);
        for (i, row) in f.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                factor[offset + i][offset + j] = *v;
            }
        }
    }
    Shape::Ellipsoid { center, factor }
}

pub fn joint_case(rng: &mut SeededRng) -> JointCase {
    let rows = rng.random_range(2..=4);
    let d = rng.random_range(2..=3);
    let m = rows * d;
    // independent rows: block-diagonal covariance
    let mut root = DMatrix::zeros(m, m);
    for i in 0..rows {
        let block = sym_sqrt(&random_spd(rng, d)) * 0.3;
        root.view_mut((i * d, i * d), (d, d)).copy_from(&block);
    }
    let mean = uniform_vec(rng, m, 0.5, 1.5);
    let phase1 = Dataset::from_rows(&gaussian_rows(rng, 60, &mean, &root)).unwrap();
    let phase2 = Dataset::from_rows(&gaussian_rows(rng, 100, &mean, &root)).unwrap();
    let mut det = Vec::new();
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        det.push(DetConstraint {
            coeffs: e.clone(),
            rhs: 10.0,
        });
        e[j] = -1.0;
        det.push(DetConstraint {
            coeffs: e,
            rhs: 0.0,
        });
    }
    let spec = CcpSpec {
        objective: uniform_vec(rng, d, -1.5, -0.5),
        family: ConstraintFamily::JointLinear { rows },
        rhs: uniform_vec(rng, rows, 5.0, 10.0),
        det_constraints: det,
        epsilon: 0.05,
        delta: 0.05,
    };
    let individual = block_ellipsoids(&phase1, rows, EllipsoidMode::Full, 1e-6).unwrap();
    let joint = consolidate(&individual);
    let set_i = build_prediction_set(individual, &phase2, spec.epsilon, spec.delta).unwrap();
    let set_j = build_prediction_set(joint, &phase2, spec.epsilon, spec.delta).unwrap();
    let sol_i = solve_robust(&spec, &set_i).unwrap();
    let sol_j = solve_robust(&spec, &set_j).unwrap();
    assert_eq!(sol_i.status, SolveStatus::Optimal);
    assert_eq!(sol_j.status, SolveStatus::Optimal);
    JointCase {
        size_joint: set_j.size,
        size_individual: set_i.size,
        objective_joint: sol_j.objective,
        objective_individual: sol_i.objective,
    }
}
