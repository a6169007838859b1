//! Replicated experiments: data generation, method execution, violation evaluation and
//! aggregation into feasibility statistics.
//!
//! Replication `r` of a run with master seed `S` draws everything from the stream seeded by
//! `S ^ r`, so reports do not depend on execution order or thread count.

mod instances;
mod pipeline;
mod sampler;
mod violation;

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    safe_gaussian, safe_hoeffding, sg_solve, GaussianBounds, PerturbationModel,
};
use crate::conic::{solve, SolveStatus, SolverSettings};
use crate::error::{invalid, Result};
use crate::model::{rng_from_seed, split_data, CcpSpec};
use crate::shapes::build_prediction_set;

pub use instances::{preset, preset_names, PRESET_NAMES};
pub use pipeline::{
    fit_shape, reconstruction_pipeline, solve_robust, ReconstructionOutcome, RobustSolve,
    ScalePolicy, ShapeConfig,
};
pub use sampler::{GaussianComponent, PerturbationLaw, Sampler};
pub use violation::{exact_violation, gaussian_violation, mc_violation};

/// Default number of fresh draws used to estimate a violation probability.
pub const DEFAULT_N_EVAL: usize = 10_000;

fn default_n_eval() -> usize {
    DEFAULT_N_EVAL
}

/// Solution method of an experiment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ro,
    RoReconstructed,
    Sg,
    SafeHoeffding,
    SafeGaussian,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ro => "ro",
            Method::RoReconstructed => "ro_reconstructed",
            Method::Sg => "sg",
            Method::SafeHoeffding => "safe_hoeffding",
            Method::SafeGaussian => "safe_gaussian",
        }
    }

    fn uses_split(&self) -> bool {
        matches!(self, Method::Ro | Method::RoReconstructed)
    }
}

/// One method applied to one problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub label: String,
    pub spec: CcpSpec,
    pub sampler: Sampler,
    pub method: Method,
    /// Phase-1 shape; required by the robust methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeConfig>,
    /// Total sample size per replication.
    pub n: usize,
    /// Phase-1 size; required by the robust methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n1: Option<usize>,
    #[serde(default)]
    pub scale_policy: ScalePolicy,
    /// Bounds for the Gaussian safe approximation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<GaussianBounds>,
    #[serde(default = "default_n_eval")]
    pub n_eval: usize,
}

/// Method-specific part of an [`ExperimentConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub label: String,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeConfig>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n1: Option<usize>,
    #[serde(default)]
    pub scale_policy: ScalePolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<GaussianBounds>,
}

/// Several methods compared on one instance; the JSON schema of experiment files.
///
/// Arms sharing a sample size see identical data in every replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSuite {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub spec: CcpSpec,
    pub sampler: Sampler,
    #[serde(default = "default_n_eval")]
    pub n_eval: usize,
    pub arms: Vec<ArmConfig>,
}

impl ExperimentSuite {
    pub fn from_json(text: &str) -> Result<Self> {
        let suite: ExperimentSuite = serde_json::from_str(text)?;
        for c in suite.configs() {
            c.validate()?;
        }
        Ok(suite)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite serializes")
    }

    /// One configuration per arm.
    pub fn configs(&self) -> Vec<ExperimentConfig> {
        self.arms
            .iter()
            .map(|a| ExperimentConfig {
                label: a.label.clone(),
                spec: self.spec.clone(),
                sampler: self.sampler.clone(),
                method: a.method,
                shape: a.shape.clone(),
                n: a.n,
                n1: a.n1,
                scale_policy: a.scale_policy,
                bounds: a.bounds.clone(),
                n_eval: self.n_eval,
            })
            .collect()
    }

    /// Runs every arm with the same master seed.
    pub fn run(&self, reps: usize, master_seed: u64) -> Result<Vec<ExperimentReport>> {
        self.configs()
            .iter()
            .map(|c| run_replications(c, reps, master_seed))
            .collect()
    }
}

impl ExperimentConfig {
    /// Checks that the method has what it needs.
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.sampler.dim() != self.spec.data_dim() {
            return invalid(format!(
                "{}: sampler dimension {} differs from the data dimension {}",
                self.label,
                self.sampler.dim(),
                self.spec.data_dim()
            ));
        }
        if self.n_eval == 0 {
            return invalid("n_eval must be at least 1");
        }
        if self.method.uses_split() {
            if self.shape.is_none() {
                return invalid(format!("{}: robust methods need a shape", self.label));
            }
            match self.n1 {
                Some(n1) if n1 >= 1 && n1 < self.n => {}
                _ => return invalid(format!("{}: n1 must lie in [1, n)", self.label)),
            }
        }
        if self.method == Method::SafeGaussian && self.bounds.is_none() {
            return invalid(format!(
                "{}: the Gaussian safe approximation needs bounds",
                self.label
            ));
        }
        if matches!(self.method, Method::SafeHoeffding | Method::SafeGaussian) {
            self.perturbation_model()?;
        }
        Ok(())
    }

    fn perturbation_model(&self) -> Result<PerturbationModel> {
        match &self.sampler {
            Sampler::Perturbation { a0, directions, .. } => Ok(PerturbationModel {
                a0: a0.clone(),
                directions: directions.clone(),
            }),
            _ => invalid("safe approximations need a perturbation sampler"),
        }
    }

    /// Phase-2 size, when the method splits the data.
    pub fn n2(&self) -> Option<usize> {
        if self.method.uses_split() {
            self.n1.map(|n1| self.n - n1)
        } else {
            None
        }
    }
}

/// Outcome class of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
    ExportOnly,
    Error,
}

impl RepStatus {
    pub fn name(&self) -> &'static str {
        match self {
            RepStatus::Optimal => "optimal",
            RepStatus::Infeasible => "infeasible",
            RepStatus::Unbounded => "unbounded",
            RepStatus::IterLimit => "iter_limit",
            RepStatus::ExportOnly => "export_only",
            RepStatus::Error => "error",
        }
    }
}

impl From<SolveStatus> for RepStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => RepStatus::Optimal,
            SolveStatus::Infeasible => RepStatus::Infeasible,
            SolveStatus::Unbounded => RepStatus::Unbounded,
            SolveStatus::IterLimit => RepStatus::IterLimit,
            SolveStatus::ExportOnly => RepStatus::ExportOnly,
        }
    }
}

/// Result of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    pub status: RepStatus,
    pub objective: Option<f64>,
    pub violation: Option<f64>,
    /// Calibrated size of the set used by the final solve.
    pub size: Option<f64>,
    /// Objective of the incumbent before reconstruction.
    pub initial_objective: Option<f64>,
    /// Optimal objective over the reconstructed set itself, before the incumbent is
    /// substituted; absent when that solve was not optimal.
    pub rebuilt_objective: Option<f64>,
    pub message: Option<String>,
}

/// Aggregated statistics of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub label: String,
    pub method: Method,
    pub shape: Option<ShapeConfig>,
    pub epsilon: f64,
    pub delta: f64,
    pub n: usize,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub master_seed: u64,
    pub reps: usize,
    /// Replications that returned an optimal solution.
    pub successes: usize,
    pub status_counts: BTreeMap<String, usize>,
    pub mean_objective: Option<f64>,
    /// Mean violation probability over successful replications.
    pub eps_hat: Option<f64>,
    /// Fraction of replications whose violation probability exceeds epsilon; replications
    /// without a solution count as exceeding, export-only ones are left out.
    pub delta_hat: Option<f64>,
    /// Mean incumbent objective before reconstruction.
    pub mean_initial_objective: Option<f64>,
}

/// Per-replication records with their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub summary: ExperimentSummary,
    pub records: Vec<ReplicationRecord>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut acc = crate::calibrate::KahanSum::default();
    let mut k = 0usize;
    for v in values {
        acc.add(v);
        k += 1;
    }
    (k > 0).then(|| acc.value() / k as f64)
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    /// Builds the summary from records in any order.
    pub fn aggregate(
        config: &ExperimentConfig,
        master_seed: u64,
        mut records: Vec<ReplicationRecord>,
    ) -> Self {
        records.sort_by_key(|r| r.replication);
        let eps = config.spec.epsilon;
        let mut status_counts = BTreeMap::new();
        for r in &records {
            *status_counts
                .entry(r.status.name().to_string())
                .or_insert(0) += 1;
        }
        let optimal: Vec<&ReplicationRecord> = records
            .iter()
            .filter(|r| r.status == RepStatus::Optimal)
            .collect();
        let scored = records
            .iter()
            .filter(|r| r.status != RepStatus::ExportOnly)
            .count();
        let exceed = records
            .iter()
            .filter(|r| match r.status {
                RepStatus::ExportOnly => false,
                RepStatus::Optimal => r.violation.is_none_or(|v| v > eps),
                _ => true,
            })
            .count();
        let summary = ExperimentSummary {
            label: config.label.clone(),
            method: config.method,
            shape: config.shape.clone(),
            epsilon: eps,
            delta: config.spec.delta,
            n: config.n,
            n1: config.n2().and(config.n1),
            n2: config.n2(),
            master_seed,
            reps: records.len(),
            successes: optimal.len(),
            status_counts,
            mean_objective: mean(optimal.iter().filter_map(|r| r.objective)),
            eps_hat: mean(optimal.iter().filter_map(|r| r.violation)),
            delta_hat: (scored > 0).then(|| exceed as f64 / scored as f64),
            mean_initial_objective: mean(optimal.iter().filter_map(|r| r.initial_objective)),
        };
        ExperimentReport { summary, records }
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    /// One CSV row per replication, with a header.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "label",
            "replication",
            "seed",
            "status",
            "objective",
            "violation",
            "size",
            "initial_objective",
            "rebuilt_objective",
            "message",
        ])
        .expect("in-memory write");
        for r in &self.records {
            w.write_record([
                self.summary.label.clone(),
                r.replication.to_string(),
                r.seed.to_string(),
                r.status.name().to_string(),
                opt_num(r.objective),
                opt_num(r.violation),
                opt_num(r.size),
                opt_num(r.initial_objective),
                opt_num(r.rebuilt_objective),
                r.message.clone().unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

/// Seed of replication `r`.
pub fn replication_seed(master_seed: u64, r: usize) -> u64 {
    master_seed ^ r as u64
}

struct Attempt {
    status: SolveStatus,
    x: Vec<f64>,
    objective: f64,
    size: Option<f64>,
    initial_objective: Option<f64>,
    rebuilt_objective: Option<f64>,
}

fn attempt(
    config: &ExperimentConfig,
    data_seed: u64,
    split_seed: u64,
    fit_seed: u64,
) -> Result<Attempt> {
    let settings = SolverSettings::default();
    let draw = || {
        config
            .sampler
            .sample(config.n, &mut rng_from_seed(data_seed))
    };
    match config.method {
        Method::Ro => {
            let split = split_data(&draw()?, config.n1.unwrap_or(0), split_seed)?;
            let shape = fit_shape(
                config.shape.as_ref().expect("validated"),
                &split.phase1,
                fit_seed,
            )?;
            let set =
                build_prediction_set(shape, &split.phase2, config.spec.epsilon, config.spec.delta)?;
            let size = set.size;
            let r = solve_robust(&config.spec, &set)?;
            Ok(Attempt {
                status: r.status,
                x: r.x,
                objective: r.objective,
                size: Some(size),
                initial_objective: None,
                rebuilt_objective: None,
            })
        }
        Method::RoReconstructed => {
            let split = split_data(&draw()?, config.n1.unwrap_or(0), split_seed)?;
            let out = reconstruction_pipeline(
                &split,
                &config.spec,
                config.shape.as_ref().expect("validated"),
                config.scale_policy,
                fit_seed,
            )?;
            Ok(Attempt {
                status: out.status,
                objective: out.objective,
                x: out.x_tilde,
                size: out.rho,
                initial_objective: Some(out.initial_objective),
                rebuilt_objective: out
                    .rebuilt
                    .filter(|r| r.status == SolveStatus::Optimal)
                    .map(|r| r.objective),
            })
        }
        Method::Sg => {
            let sol = sg_solve(&config.spec, &draw()?)?;
            let x = sol.x[..config.spec.d()].to_vec();
            Ok(Attempt {
                status: sol.status,
                x,
                objective: sol.primal_objective,
                size: None,
                initial_objective: None,
                rebuilt_objective: None,
            })
        }
        Method::SafeHoeffding | Method::SafeGaussian => {
            let model = config.perturbation_model()?;
            let prog = if config.method == Method::SafeHoeffding {
                safe_hoeffding(&config.spec, &model)?
            } else {
                safe_gaussian(
                    &config.spec,
                    &model,
                    config.bounds.as_ref().expect("validated"),
                )?
            };
            let sol = solve(&prog, &settings)?;
            let x = sol.x[..config.spec.d()].to_vec();
            Ok(Attempt {
                status: sol.status,
                x,
                objective: sol.primal_objective,
                size: None,
                initial_objective: None,
                rebuilt_objective: None,
            })
        }
    }
}

/// Runs replication `r` end to end.
pub fn run_replication(config: &ExperimentConfig, r: usize, master_seed: u64) -> ReplicationRecord {
    let seed = replication_seed(master_seed, r);
    let mut rng = rng_from_seed(seed);
    let data_seed: u64 = rng.random();
    let split_seed: u64 = rng.random();
    let fit_seed: u64 = rng.random();
    let eval_seed: u64 = rng.random();
    let mut record = ReplicationRecord {
        replication: r,
        seed,
        status: RepStatus::Error,
        objective: None,
        violation: None,
        size: None,
        initial_objective: None,
        rebuilt_objective: None,
        message: None,
    };
    let outcome = attempt(config, data_seed, split_seed, fit_seed).and_then(|a| {
        let violation = if a.status == SolveStatus::Optimal {
            let v = match exact_violation(&config.sampler, &config.spec, &a.x) {
                Some(v) => v?,
                None => mc_violation(
                    &a.x,
                    &config.sampler,
                    eval_seed,
                    &config.spec,
                    config.n_eval,
                )?,
            };
            Some(v)
        } else {
            None
        };
        Ok((a, violation))
    });
    match outcome {
        Ok((a, violation)) => {
            record.status = a.status.into();
            record.size = a.size;
            record.rebuilt_objective = a.rebuilt_objective;
            if a.status == SolveStatus::Optimal {
                record.objective = Some(a.objective);
                record.violation = violation;
                record.initial_objective = a.initial_objective;
            }
        }
        Err(e) => record.message = Some(e.to_string()),
    }
    record
}

/// Runs `reps` independent replications (in parallel on the current thread pool) and
/// aggregates them. Per-replication failures are recorded, not returned.
pub fn run_replications(
    config: &ExperimentConfig,
    reps: usize,
    master_seed: u64,
) -> Result<ExperimentReport> {
    config.validate()?;
    if reps == 0 {
        return invalid("at least one replication is required");
    }
    let records: Vec<ReplicationRecord> = (0..reps)
        .into_par_iter()
        .map(|r| run_replication(config, r, master_seed))
        .collect();
    Ok(ExperimentReport::aggregate(config, master_seed, records))
}
