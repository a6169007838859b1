//! Replication harness: seeding, determinism, aggregation and violation estimates.

mod common;

use std::path::PathBuf;

use common::*;
use lbro_core::harness::{
    gaussian_violation, mc_violation, preset, preset_names, replication_seed, run_replication,
    run_replications, ExperimentConfig, ExperimentReport, ExperimentSuite, GaussianComponent,
    Method, RepStatus, Sampler, ShapeConfig,
};
use lbro_core::model::{CcpSpec, ConstraintFamily};
use lbro_core::shapes::EllipsoidMode;
use nalgebra::DMatrix;
use rand::Rng;

fn small_gaussian_config(method: Method) -> ExperimentConfig {
    let d = 3;
    ExperimentConfig {
        label: "small".into(),
        spec: CcpSpec {
            objective: vec![-1.0, -0.5, -0.8],
            family: ConstraintFamily::SingleLinear,
            rhs: vec![10.0],
            det_constraints: vec![],
            epsilon: 0.05,
            delta: 0.05,
        },
        sampler: Sampler::Gaussian(GaussianComponent {
            mean: vec![1.0, 0.8, 1.2],
            covariance: (0..d)
                .map(|i| (0..d).map(|j| if i == j { 0.04 } else { 0.01 }).collect())
                .collect(),
        }),
        method,
        shape: Some(ShapeConfig::Ellipsoid {
            mode: EllipsoidMode::Full,
            ridge: 1e-6,
        }),
        n: 120,
        n1: Some(60),
        scale_policy: Default::default(),
        bounds: None,
        n_eval: 2_000,
    }
}

#[test]
fn replication_seed_is_an_xor() {
    assert_eq!(replication_seed(0b1010, 0b0110), 0b1100);
    assert_eq!(replication_seed(7, 0), 7);
}

#[test]
fn reports_are_reproducible() {
    let config = small_gaussian_config(Method::RoReconstructed);
    let a = run_replications(&config, 4, 99).unwrap();
    let b = run_replications(&config, 4, 99).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.summary_json(), b.summary_json());
}

#[test]
fn execution_order_and_threads_do_not_matter() {
    let config = small_gaussian_config(Method::Ro);
    let reference = run_replications(&config, 6, 5).unwrap();
    let reversed: Vec<_> = (0..6)
        .rev()
        .map(|r| run_replication(&config, r, 5))
        .collect();
    assert_eq!(ExperimentReport::aggregate(&config, 5, reversed), reference);
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    assert_eq!(
        single.install(|| run_replications(&config, 6, 5).unwrap()),
        reference
    );
}

#[test]
fn robust_solution_is_feasible_with_high_confidence() {
    let config = small_gaussian_config(Method::Ro);
    let report = run_replications(&config, 20, 3).unwrap();
    let s = &report.summary;
    assert_eq!(s.successes, 20);
    assert!(s.delta_hat.unwrap() <= 0.1);
    assert!(s.eps_hat.unwrap() <= 0.05);
    assert!(report
        .records
        .iter()
        .all(|r| r.status == RepStatus::Optimal && r.violation.is_some()));
}

#[test]
fn csv_has_one_row_per_replication() {
    let report = run_replications(&small_gaussian_config(Method::Sg), 3, 1).unwrap();
    let csv = report.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("label,replication,seed,status"));
    assert!(lines[1].starts_with("small,0,1,"));
}

#[test]
fn unbounded_scenario_programs_count_as_failures() {
    // d = 100 with 120 scenarios cannot pin the solution down
    let suite = preset("sg_d100").unwrap();
    let config = suite
        .configs()
        .into_iter()
        .find(|c| c.method == Method::Sg && c.n == 120)
        .unwrap();
    let report = run_replications(&config, 3, 7).unwrap();
    let s = &report.summary;
    assert_eq!(s.status_counts.get("unbounded"), Some(&3));
    assert_eq!(s.delta_hat, Some(1.0));
    assert_eq!(s.eps_hat, None);
    assert_eq!(s.mean_objective, None);
}

#[test]
fn export_only_families_are_reported_not_failed() {
    for name in ["quadratic", "semidefinite"] {
        let suite = preset(name).unwrap();
        let config = suite
            .configs()
            .into_iter()
            .find(|c| c.method == Method::Ro)
            .unwrap();
        let report = run_replications(&config, 2, 1).unwrap();
        assert!(report
            .records
            .iter()
            .all(|r| r.status == RepStatus::ExportOnly));
        assert_eq!(report.summary.delta_hat, None);
        assert_eq!(report.summary.successes, 0);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut config = small_gaussian_config(Method::Ro);
    config.shape = None;
    assert!(run_replications(&config, 1, 1).is_err());
    let config = small_gaussian_config(Method::Ro);
    assert!(run_replications(&config, 0, 1).is_err());
    let mut config = small_gaussian_config(Method::Ro);
    config.n1 = Some(120);
    assert!(config.validate().is_err());
}

#[test]
fn mc_violation_agrees_with_the_normal_tail() {
    let mut rng = rng_from_seed(51);
    let d = 3;
    let n_eval = 10_000;
    for _ in 0..100 {
        let mean = normal_vec(&mut rng, d);
        let cov = random_spd(&mut rng, d);
        let x = normal_vec(&mut rng, d);
        let sd = (DMatrix::from_column_slice(1, d, &x)
            * &cov
            * DMatrix::from_column_slice(d, 1, &x))[(0, 0)]
            .sqrt();
        // rhs at a random quantile so that p is not always tiny
        let b = dot(&mean, &x) + sd * rng.random_range(-1.0..2.5);
        let spec = CcpSpec {
            objective: vec![0.0; d],
            family: ConstraintFamily::SingleLinear,
            rhs: vec![b],
            det_constraints: vec![],
            epsilon: 0.05,
            delta: 0.05,
        };
        let sampler = Sampler::Gaussian(GaussianComponent {
            mean: mean.clone(),
            covariance: (0..d)
                .map(|i| (0..d).map(|j| cov[(i, j)]).collect())
                .collect(),
        });
        let exact = gaussian_violation(&x, &mean, &cov, b).unwrap();
        let seed: u64 = rng.random();
        let mc = mc_violation(&x, &sampler, seed, &spec, n_eval).unwrap();
        let se = (exact * (1.0 - exact) / n_eval as f64).sqrt();
        assert!(
            (mc - exact).abs() <= 3.0 * se + 1.0 / n_eval as f64,
            "{mc} vs {exact}"
        );
    }
}

#[test]
fn mc_violation_extremes() {
    let sampler = Sampler::Gaussian(GaussianComponent {
        mean: vec![0.0; 4],
        covariance: (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect(),
    });
    let single = CcpSpec {
        objective: vec![0.0; 2],
        family: ConstraintFamily::JointLinear { rows: 2 },
        rhs: vec![1e6, 1e6],
        det_constraints: vec![],
        epsilon: 0.05,
        delta: 0.05,
    };
    assert_eq!(
        mc_violation(&[1.0, 1.0], &sampler, 1, &single, 1000).unwrap(),
        0.0
    );
    let mut always = single.clone();
    always.rhs = vec![1e6, -1e6];
    assert_eq!(
        mc_violation(&[1.0, 1.0], &sampler, 1, &always, 1000).unwrap(),
        1.0
    );
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// The shipped experiment files are the presets; set `LBRO_WRITE_CONFIGS=1` to regenerate.
#[test]
fn shipped_configs_match_presets() {
    let write = std::env::var("LBRO_WRITE_CONFIGS").is_ok_and(|v| v == "1");
    for name in preset_names() {
        let suite = preset(name).unwrap();
        let path = configs_dir().join(format!("{name}.json"));
        let text = suite.to_json() + "\n";
        if write {
            std::fs::create_dir_all(configs_dir()).unwrap();
            std::fs::write(&path, &text).unwrap();
        }
        let shipped =
            std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(
            ExperimentSuite::from_json(&shipped).unwrap(),
            suite,
            "{name}"
        );
    }
}
