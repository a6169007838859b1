//! Preset experiment suites. Their problem constants are drawn once from fixed seeds, so a
//! preset is fully reproducible and can be written out as a JSON experiment file.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use super::pipeline::{ScalePolicy, ShapeConfig};
use super::sampler::{GaussianComponent, PerturbationLaw, Sampler};
use super::{ArmConfig, ExperimentSuite, Method, DEFAULT_N_EVAL};
use crate::baselines::GaussianBounds;
use crate::conic::{solve, Affine, ProgramBuilder, SolveStatus, SolverSettings};
use crate::error::{invalid, Result};
use crate::model::{rng_from_seed, CcpSpec, ConstraintFamily, DetConstraint, SeededRng};
use crate::shapes::EllipsoidMode;

/// Names accepted by [`preset`].
pub const PRESET_NAMES: &[&str] = &[
    "bounded_perturbation",
    "gaussian_perturbation",
    "sg_d11",
    "sg_d50",
    "sg_d100",
    "mixture_clusters",
    "pca",
    "basis",
    "basis_mixture",
    "joint",
    "quadratic",
    "semidefinite",
];

const EPSILON: f64 = 0.05;
const DELTA: f64 = 0.05;
/// Norm of the whitened mean of the single-row instances.
const MEAN_NORM: f64 = 0.8;
const RHS: f64 = 100.0;
const RIDGE: f64 = 1e-8;

fn normals(rng: &mut SeededRng, k: usize) -> Vec<f64> {
    (0..k).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(rng: &mut SeededRng, k: usize) -> DVector<f64> {
    DVector::from_vec(normals(rng, k)).normalize()
}

/// `Q diag(lambda) Q'` with a random orthogonal `Q` and eigenvalues uniform on `[lo, hi]`.
fn random_cov(rng: &mut SeededRng, k: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let g = DMatrix::from_vec(k, k, normals(rng, k * k));
    let q = g.qr().q();
    let lambda = DVector::from_fn(k, |_, _| rng.random_range(lo..=hi));
    let mut m = &q * DMatrix::from_diagonal(&lambda) * q.transpose();
    crate::model::symmetrize(&mut m);
    m
}

fn sqrt_spd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn vecd(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Mean and cost of a single-row instance in the coordinates `u = S x`: whitened mean `w`
/// with `||w|| = 0.8` and cost `g` pointing mostly along `-w`.
fn mean_and_cost(rng: &mut SeededRng, sqrt_cov: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let k = sqrt_cov.nrows();
    let w = unit(rng, k) * MEAN_NORM;
    let g = -(w.normalize() + unit(rng, k) * 0.5) * 1000.0;
    (vecd(&(sqrt_cov * w)), vecd(&(sqrt_cov * g)))
}

fn single(objective: Vec<f64>) -> CcpSpec {
    CcpSpec {
        objective,
        family: ConstraintFamily::SingleLinear,
        rhs: vec![RHS],
        det_constraints: Vec::new(),
        epsilon: EPSILON,
        delta: DELTA,
    }
}

/// Optimum of `min c'x s.t. mu'x + z ||S x|| <= b` with `z` the `1 - eps` normal quantile:
/// the chance-constrained optimum for `xi ~ N(mu, S S')`.
fn gaussian_optimum(spec: &CcpSpec, mean: &[f64], sqrt_cov: &DMatrix<f64>) -> Option<f64> {
    let z = Normal::standard().inverse_cdf(1.0 - spec.epsilon);
    let mut b = ProgramBuilder::new();
    let x = b.new_vars(spec.d());
    let lin = |coef: &[f64], scale: f64| {
        Affine::from_terms(
            0.0,
            x.iter().zip(coef).map(|(&v, &c)| (v, scale * c)).collect(),
        )
    };
    for (j, &c) in spec.objective.iter().enumerate() {
        b.set_cost(x[j], c);
    }
    let mut head = Affine::constant(spec.rhs[0]);
    head.add_scaled(&lin(mean, 1.0), -1.0);
    let mut block = vec![head];
    for i in 0..sqrt_cov.nrows() {
        let row: Vec<f64> = sqrt_cov.row(i).iter().copied().collect();
        block.push(lin(&row, z));
    }
    b.add_soc(block);
    let sol = solve(&b.build(), &SolverSettings::default()).ok()?;
    (sol.status == SolveStatus::Optimal).then_some(sol.primal_objective)
}

fn ell(mode: EllipsoidMode) -> Option<ShapeConfig> {
    Some(ShapeConfig::Ellipsoid { mode, ridge: RIDGE })
}

fn arm(
    label: &str,
    method: Method,
    shape: Option<ShapeConfig>,
    n: usize,
    n1: Option<usize>,
) -> ArmConfig {
    ArmConfig {
        label: label.into(),
        method,
        shape,
        n,
        n1,
        scale_policy: ScalePolicy::RhsGap,
        bounds: None,
    }
}

/// Learning-based RO, its reconstruction and scenario generation at one sample size.
fn ro_sg_arms(n: usize, n1: usize, mode: EllipsoidMode) -> Vec<ArmConfig> {
    vec![
        arm(&format!("sg_n{n}"), Method::Sg, None, n, None),
        arm(&format!("ro_n{n}"), Method::Ro, ell(mode), n, Some(n1)),
        arm(
            &format!("ro_reconstructed_n{n}"),
            Method::RoReconstructed,
            ell(mode),
            n,
            Some(n1),
        ),
    ]
}

fn suite(
    name: &str,
    description: String,
    spec: CcpSpec,
    sampler: Sampler,
    arms: Vec<ArmConfig>,
) -> ExperimentSuite {
    ExperimentSuite {
        name: name.into(),
        description,
        spec,
        sampler,
        n_eval: DEFAULT_N_EVAL,
        arms,
    }
}

fn gaussian_single(d: usize, seed: u64) -> (CcpSpec, Sampler, String) {
    let mut rng = rng_from_seed(seed);
    let cov = random_cov(&mut rng, d, 0.5, 2.0);
    let root = sqrt_spd(&cov);
    let (mean, c) = mean_and_cost(&mut rng, &root);
    let spec = single(c);
    let opt = gaussian_optimum(&spec, &mean, &root);
    let note = format!(
        "Gaussian xi in dimension {d}; chance-constrained optimum {}",
        opt.map_or("unavailable".into(), |v| format!("{v:.4}"))
    );
    (
        spec,
        Sampler::Gaussian(GaussianComponent {
            mean,
            covariance: rows(&cov),
        }),
        note,
    )
}

fn sg_comparison(
    name: &str,
    d: usize,
    large: (usize, usize),
    mode: EllipsoidMode,
    seed: u64,
) -> ExperimentSuite {
    let (spec, sampler, note) = gaussian_single(d, seed);
    let mut arms = ro_sg_arms(120, 60, mode);
    arms.extend(ro_sg_arms(large.0, large.1, mode));
    suite(name, note, spec, sampler, arms)
}

fn bounded_perturbation() -> ExperimentSuite {
    let (d, l) = (10, 15);
    let mut rng = rng_from_seed(0xB0_0001);
    let a = DMatrix::from_vec(d, l, normals(&mut rng, d * l));
    // covariance of xi is 0.2 A A' for perturbations 2 Beta(2, 2) - 1
    let root = sqrt_spd(&((&a * a.transpose()) * 0.2));
    let (a0, c) = mean_and_cost(&mut rng, &root);
    let sampler = Sampler::Perturbation {
        a0,
        directions: (0..l)
            .map(|i| a.column(i).iter().copied().collect())
            .collect(),
        law: PerturbationLaw::ScaledBeta {
            alpha: 2.0,
            beta: 2.0,
        },
    };
    let mut arms = vec![arm(
        "safe_hoeffding",
        Method::SafeHoeffding,
        None,
        120,
        None,
    )];
    arms.extend(ro_sg_arms(120, 60, EllipsoidMode::Full));
    suite(
        "bounded_perturbation",
        "xi = a0 + sum of 15 perturbations 2 Beta(2, 2) - 1 along fixed directions, dimension 10"
            .into(),
        single(c),
        sampler,
        arms,
    )
}

fn gaussian_perturbation() -> ExperimentSuite {
    let (spec, sampler, note) = gaussian_single(11, 0xB0_0002);
    let Sampler::Gaussian(g) = sampler else {
        unreachable!()
    };
    let cov = DMatrix::from_fn(11, 11, |i, j| g.covariance[i][j]);
    let root = sqrt_spd(&cov);
    let sampler = Sampler::Perturbation {
        a0: g.mean,
        directions: (0..11)
            .map(|i| root.column(i).iter().copied().collect())
            .collect(),
        law: PerturbationLaw::StandardNormal,
    };
    let mut safe = arm("safe_gaussian", Method::SafeGaussian, None, 120, None);
    safe.bounds = Some(GaussianBounds {
        mu_minus: vec![0.0; 11],
        mu_plus: vec![0.0; 11],
        sigma: vec![1.0; 11],
    });
    let mut arms = vec![safe];
    arms.extend(ro_sg_arms(120, 60, EllipsoidMode::Diag));
    suite("gaussian_perturbation", note, spec, sampler, arms)
}

fn mixture(k: usize, seed: u64) -> (CcpSpec, Sampler) {
    let d = 11;
    let mut rng = rng_from_seed(seed);
    let covs: Vec<DMatrix<f64>> = (0..k).map(|_| random_cov(&mut rng, d, 0.3, 1.0)).collect();
    let avg = covs.iter().fold(DMatrix::zeros(d, d), |acc, c| acc + c) / k as f64;
    let root = sqrt_spd(&avg);
    let w = unit(&mut rng, d) * MEAN_NORM;
    let g = -(w.normalize() + unit(&mut rng, d) * 0.5) * 1000.0;
    // shifts lean toward the mean direction; centering them keeps the problem bounded
    let along = w.normalize();
    let mut shifts: Vec<DVector<f64>> = (0..k)
        .map(|i| {
            let t = 2.0 * i as f64 / (k - 1) as f64 - 1.0;
            &along * (6.0 * t) + unit(&mut rng, d)
        })
        .collect();
    let center = shifts.iter().fold(DVector::zeros(d), |acc, s| acc + s) / k as f64;
    shifts.iter_mut().for_each(|s| *s -= &center);
    let components = covs
        .iter()
        .zip(&shifts)
        .map(|(cov, shift)| GaussianComponent {
            mean: vecd(&(&root * (&w + shift))),
            covariance: rows(cov),
        })
        .collect();
    (
        single(vecd(&(&root * g))),
        Sampler::Mixture {
            weights: vec![1.0 / k as f64; k],
            components,
        },
    )
}

fn mixture_clusters() -> ExperimentSuite {
    let (spec, sampler) = mixture(2, 0xB0_0003);
    let clusters = Some(ShapeConfig::Clusters {
        k: 2,
        mode: EllipsoidMode::Full,
        ridge: RIDGE,
    });
    let arms = vec![
        arm("sg", Method::Sg, None, 300, None),
        arm(
            "ro_ellipsoid",
            Method::Ro,
            ell(EllipsoidMode::Full),
            300,
            Some(240),
        ),
        arm("ro_clusters", Method::Ro, clusters.clone(), 300, Some(240)),
        arm(
            "ro_reconstructed_ellipsoid",
            Method::RoReconstructed,
            ell(EllipsoidMode::Full),
            300,
            Some(240),
        ),
        arm(
            "ro_reconstructed_clusters",
            Method::RoReconstructed,
            clusters,
            300,
            Some(240),
        ),
    ];
    suite(
        "mixture_clusters",
        "equal-weight mixture of two Gaussians in dimension 11".into(),
        spec,
        sampler,
        arms,
    )
}

fn pca() -> ExperimentSuite {
    let (m, k) = (110, 11);
    let mut rng = rng_from_seed(0xB0_0004);
    let cov = random_cov(&mut rng, k, 0.5, 2.0);
    let root = sqrt_spd(&cov);
    let (mean, g) = mean_and_cost(&mut rng, &root);
    let p = DMatrix::from_vec(m, k, normals(&mut rng, m * k)) / (k as f64).sqrt();
    let c = &p * DVector::from_vec(g);
    let arms = vec![
        arm("sg", Method::Sg, None, 120, None),
        arm(
            "ro_diag",
            Method::Ro,
            ell(EllipsoidMode::Diag),
            120,
            Some(60),
        ),
        arm(
            "ro_pca",
            Method::Ro,
            Some(ShapeConfig::Pca {
                variance_keep: 0.9999,
                ridge: RIDGE,
            }),
            120,
            Some(60),
        ),
    ];
    suite(
        "pca",
        "xi = P z + w in dimension 110 with an 11-dimensional Gaussian z and uniform noise on [-0.0005, 0.0005]".into(),
        single(vecd(&c)),
        Sampler::LowRank {
            projection: rows(&p),
            latent: GaussianComponent {
                mean,
                covariance: rows(&cov),
            },
            noise: 5e-4,
        },
        arms,
    )
}

fn basis() -> ExperimentSuite {
    let (spec, sampler, note) = gaussian_single(11, 0xB0_0005);
    let arms = vec![
        arm("sg", Method::Sg, None, 80, None),
        arm(
            "ro_ellipsoid",
            Method::Ro,
            ell(EllipsoidMode::Full),
            80,
            Some(21),
        ),
        arm(
            "ro_diag",
            Method::Ro,
            ell(EllipsoidMode::Diag),
            80,
            Some(21),
        ),
        arm(
            "ro_basis",
            Method::Ro,
            Some(ShapeConfig::BallBasis),
            80,
            Some(21),
        ),
    ];
    suite("basis", note, spec, sampler, arms)
}

fn basis_mixture() -> ExperimentSuite {
    let (spec, sampler) = mixture(5, 0xB0_0006);
    let arms = vec![
        arm("sg", Method::Sg, None, 300, None),
        arm(
            "ro_ellipsoid",
            Method::Ro,
            ell(EllipsoidMode::Full),
            300,
            Some(240),
        ),
        arm(
            "ro_clusters",
            Method::Ro,
            Some(ShapeConfig::Clusters {
                k: 5,
                mode: EllipsoidMode::Full,
                ridge: RIDGE,
            }),
            300,
            Some(240),
        ),
        arm(
            "ro_basis",
            Method::Ro,
            Some(ShapeConfig::BallBasis),
            300,
            Some(240),
        ),
    ];
    suite(
        "basis_mixture",
        "equal-weight mixture of five Gaussians in dimension 11".into(),
        spec,
        sampler,
        arms,
    )
}

fn joint() -> ExperimentSuite {
    let (d, l) = (11, 15);
    let mut rng = rng_from_seed(0xB0_0007);
    let mean: Vec<f64> = (0..d * l).map(|_| rng.random_range(1.0..=3.0)).collect();
    let cov = random_cov(&mut rng, d * l, 0.02, 0.2);
    let rhs: Vec<f64> = (0..l).map(|_| rng.random_range(40.0..=60.0)).collect();
    let objective: Vec<f64> = (0..d)
        .map(|_| -100.0 * rng.random_range(1.0..=2.0))
        .collect();
    let det_constraints = (0..d)
        .map(|i| {
            let mut coeffs = vec![0.0; d];
            coeffs[i] = -1.0;
            DetConstraint { coeffs, rhs: 0.0 }
        })
        .collect();
    let spec = CcpSpec {
        objective,
        family: ConstraintFamily::JointLinear { rows: l },
        rhs,
        det_constraints,
        epsilon: EPSILON,
        delta: DELTA,
    };
    let blocks = Some(ShapeConfig::BlockEllipsoids {
        blocks: l,
        mode: EllipsoidMode::Diag,
        ridge: RIDGE,
    });
    let mut arms = Vec::new();
    for (n, n1) in [(120, 60), (336, 212)] {
        arms.push(arm(&format!("sg_n{n}"), Method::Sg, None, n, None));
        arms.push(arm(
            &format!("ro_consolidated_n{n}"),
            Method::Ro,
            ell(EllipsoidMode::Diag),
            n,
            Some(n1),
        ));
        arms.push(arm(
            &format!("ro_individual_n{n}"),
            Method::Ro,
            blocks.clone(),
            n,
            Some(n1),
        ));
        arms.push(arm(
            &format!("ro_reconstructed_gap_n{n}"),
            Method::RoReconstructed,
            blocks.clone(),
            n,
            Some(n1),
        ));
        let mut std_arm = arm(
            &format!("ro_reconstructed_std_n{n}"),
            Method::RoReconstructed,
            blocks.clone(),
            n,
            Some(n1),
        );
        std_arm.scale_policy = ScalePolicy::StdDev;
        arms.push(std_arm);
    }
    suite(
        "joint",
        "joint constraint A x <= b with 15 rows, 11 nonnegative variables and Gaussian vec(A)"
            .into(),
        spec,
        Sampler::Gaussian(GaussianComponent {
            mean,
            covariance: rows(&cov),
        }),
        arms,
    )
}

fn quadratic() -> ExperimentSuite {
    let d = 10;
    let mut rng = rng_from_seed(0xB0_0008);
    let objective: Vec<f64> = (0..d).map(|_| -rng.random_range(0.5..=1.5)).collect();
    let spec = CcpSpec {
        objective,
        family: ConstraintFamily::Quadratic,
        rhs: Vec::new(),
        det_constraints: Vec::new(),
        epsilon: EPSILON,
        delta: DELTA,
    };
    let arms = vec![
        arm(
            "ro_diag",
            Method::Ro,
            ell(EllipsoidMode::Diag),
            80,
            Some(21),
        ),
        arm(
            "ro_ball",
            Method::Ro,
            ell(EllipsoidMode::Ball),
            80,
            Some(21),
        ),
    ];
    suite(
        "quadratic",
        "(x - mu)' M (x - mu) <= 100 with Wishart M and uniform mu; the robust programs carry a matrix cone and are export-only".into(),
        spec,
        Sampler::QuadraticWishart {
            d,
            dof: d,
            mean_low: 0.0,
            mean_high: 5.0,
            level: 100.0,
        },
        arms,
    )
}

fn semidefinite() -> ExperimentSuite {
    let (d, p) = (10, 5);
    let mut rng = rng_from_seed(0xB0_0009);
    let g = DMatrix::from_vec(p, p, normals(&mut rng, p * p));
    let b = -(&g * g.transpose()) / p as f64;
    let base: Vec<Vec<Vec<f64>>> = (0..d)
        .map(|_| {
            let h = DMatrix::from_vec(p, p, normals(&mut rng, p * p));
            let mut m = &h * h.transpose() / p as f64;
            crate::model::symmetrize(&mut m);
            rows(&m)
        })
        .collect();
    let objective: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..=1.5)).collect();
    let mut bm = b;
    crate::model::symmetrize(&mut bm);
    let spec = CcpSpec {
        objective,
        family: ConstraintFamily::Semidefinite {
            size: p,
            b_matrix: rows(&bm),
        },
        rhs: Vec::new(),
        det_constraints: Vec::new(),
        epsilon: EPSILON,
        delta: DELTA,
    };
    suite(
        "semidefinite",
        "B + sum_j x_j Xi_j PSD with Xi_j = A_j + Wishart; the robust program is export-only"
            .into(),
        spec,
        Sampler::SdpWishart { base, dof: p },
        vec![arm(
            "ro_ball",
            Method::Ro,
            ell(EllipsoidMode::Ball),
            80,
            Some(21),
        )],
    )
}

/// Builds a preset suite by name.
pub fn preset(name: &str) -> Result<ExperimentSuite> {
    Ok(match name {
        "bounded_perturbation" => bounded_perturbation(),
        "gaussian_perturbation" => gaussian_perturbation(),
        "sg_d11" => sg_comparison("sg_d11", 11, (336, 212), EllipsoidMode::Full, 0xB0_0011),
        "sg_d50" => sg_comparison("sg_d50", 50, (1237, 683), EllipsoidMode::Full, 0xB0_0050),
        "sg_d100" => sg_comparison("sg_d100", 100, (2331, 1318), EllipsoidMode::Diag, 0xB0_0100),
        "mixture_clusters" => mixture_clusters(),
        "pca" => pca(),
        "basis" => basis(),
        "basis_mixture" => basis_mixture(),
        "joint" => joint(),
        "quadratic" => quadratic(),
        "semidefinite" => semidefinite(),
        other => {
            return invalid(format!(
                "unknown preset {other:?}; known: {}",
                PRESET_NAMES.join(", ")
            ))
        }
    })
}

/// Names of all presets.
pub fn preset_names() -> &'static [&'static str] {
    PRESET_NAMES
}
