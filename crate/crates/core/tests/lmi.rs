//! Matrix inequalities for the quadratic and semidefinite families.

mod common;

use common::lmi::*;
use common::*;
use lbro_core::reformulate::{rc_quadratic_ellipsoid, rc_sdp_normbounded, QuadraticTerm};
use lbro_core::Error;
use nalgebra::DMatrix;

#[test]
fn quadratic_without_directions_is_the_nominal_schur_complement() {
    let center = QuadraticTerm {
        a: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]),
        b: vec![0.5, -1.0],
        c: 3.0,
    };
    let x = [0.3, -0.4];
    let m = rc_quadratic_ellipsoid(&center, &[], &[0, 1], 2)
        .unwrap()
        .eval(&[x[0], x[1], 0.0]);
    let ax = [x[0] + 2.0 * x[1], x[1]];
    let expected = DMatrix::from_row_slice(
        3,
        3,
        &[
            3.0 + 0.5 * x[0] - x[1],
            ax[0],
            ax[1],
            ax[0],
            1.0,
            0.0,
            ax[1],
            0.0,
            1.0,
        ],
    );
    assert!((m - expected).abs().max() < 1e-15);
}

#[test]
fn quadratic_mismatched_terms_are_rejected() {
    let center = QuadraticTerm {
        a: DMatrix::identity(2, 2),
        b: vec![0.0; 2],
        c: 1.0,
    };
    let bad = QuadraticTerm {
        a: DMatrix::identity(3, 3),
        b: vec![0.0; 3],
        c: 0.0,
    };
    assert!(matches!(
        rc_quadratic_ellipsoid(&center, &[bad], &[0, 1], 2),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn sdp_at_zero_radius_and_slack_is_the_nominal_matrix() {
    let centers = vec![
        DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]),
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, -1.0]),
    ];
    let b = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 3.0]);
    let x = [0.7, -1.1];
    let m = rc_sdp_normbounded(&centers, &b, 0.0, &[0, 1], 2)
        .unwrap()
        .eval(&[x[0], x[1], 0.0]);
    let nominal = &b + &centers[0] * x[0] + &centers[1] * x[1];
    assert!(m.view((0, 0), (4, 6)).iter().all(|v| *v == 0.0));
    assert!((m.view((4, 4), (2, 2)).into_owned() - nominal).abs().max() < 1e-15);
}

#[test]
fn sdp_rejects_mismatched_blocks() {
    let centers = vec![DMatrix::identity(2, 2)];
    assert!(rc_sdp_normbounded(&centers, &DMatrix::identity(3, 3), 1.0, &[0], 1).is_err());
    assert!(rc_sdp_normbounded(&centers, &DMatrix::identity(2, 2), -1.0, &[0], 1).is_err());
}

#[test]
fn golden_section_finds_the_peak() {
    let (t, v) = maximize_concave(|t| -(t - 1.3) * (t - 1.3), 0.0, 10.0);
    assert!((t - 1.3).abs() < 1e-8 && v.abs() < 1e-12);
}

#[test]
fn feasible_quadratic_lmi_protects_sampled_perturbations() {
    let mut rng = rng_from_seed(31);
    let (mut feasible, mut infeasible) = (0, 0);
    for _ in 0..60 {
        let case = quadratic_case(&mut rng, 2_000);
        assert!(case.symmetric);
        if case.lmi_feasible() {
            feasible += 1;
            assert!(case.sampled_violation <= 1e-9, "{}", case.sampled_violation);
        } else {
            infeasible += 1;
        }
        // the S-lemma makes the inequality exact, so a clearly violated sample rules it out
        if case.sampled_violation > 1e-6 {
            assert!(!case.lmi_feasible());
        }
    }
    assert!(
        feasible >= 10 && infeasible >= 1,
        "{feasible} / {infeasible}"
    );
}

#[test]
fn feasible_sdp_lmi_protects_sampled_perturbations() {
    let mut rng = rng_from_seed(32);
    let mut feasible = 0;
    for _ in 0..60 {
        let case = sdp_case(&mut rng, 2_000);
        assert!(case.symmetric);
        if case.lmi_feasible() {
            feasible += 1;
            assert!(case.sampled_violation <= 1e-9, "{}", case.sampled_violation);
        }
    }
    assert!(feasible >= 10, "{feasible}");
}
