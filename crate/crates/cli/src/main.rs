//! `lbro`: command-line front end. Results go to stdout as JSON (CSV for `table1`), logs and
//! errors to stderr. Exit codes: 0 success, 1 domain error, 2 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lbro_core::baselines::{sample_size_table, SAMPLE_SIZE_DIMS, SAMPLE_SIZE_GRID};
use lbro_core::calibrate::{
    calib_index_upper, calibrate_size, min_phase2_size, theoretical_confidence,
};
use lbro_core::conic::{export, ExportFormat, SolveStatus};
use lbro_core::harness::{
    fit_shape, preset, reconstruction_pipeline, solve_robust, ExperimentSuite, ScalePolicy,
    ShapeConfig,
};
use lbro_core::model::{split_data, CcpSpec, DataSplit, Dataset};
use lbro_core::reformulate::assemble_ro;
use lbro_core::shapes::{build_prediction_set, EllipsoidMode, PredictionSet};
use lbro_core::{Error, Result};

#[derive(Parser)]
#[command(name = "lbro", version, about = "Learning-based robust optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibration rank, minimum Phase-2 size and (with --values) the calibrated size.
    Calibrate(CalibrateArgs),
    /// Learn a shape on Phase 1 and calibrate its size on Phase 2.
    Fit(FitArgs),
    /// Fit a set and solve the robust program.
    Solve(SolveArgs),
    /// Solve, rebuild the set around the solution and solve again.
    Reconstruct(ReconstructArgs),
    /// Minimum sample sizes of the calibrated approach and of scenario generation, as CSV.
    Table1,
    /// Run a replicated experiment from a JSON file or a preset.
    Experiment(ExperimentArgs),
    /// Write the robust program in JSON or SDPA format.
    Export(ExportArgs),
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    /// Phase-2 size; defaults to the number of values in --values.
    #[arg(long)]
    n2: Option<usize>,
    /// File of transform values, one per line.
    #[arg(long)]
    values: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeKind {
    Ellipsoid,
    Diag,
    Ball,
    Polytope,
    Clusters,
    Pca,
    Basis,
    Grid,
    Blocks,
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with one observation per row.
    #[arg(long)]
    data: PathBuf,
    /// The CSV file starts with a header row.
    #[arg(long)]
    header: bool,
    /// Fraction of rows used for shape learning.
    #[arg(long, default_value_t = 0.5)]
    split: f64,
    /// Number of shape-learning rows; overrides --split.
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ShapeArgs {
    #[arg(long, value_enum, default_value = "ellipsoid")]
    shape: ShapeKind,
    /// Ridge added to degenerate covariance estimates, relative to the mean variance.
    #[arg(long, default_value_t = 1e-8)]
    ridge: f64,
    /// Number of clusters for --shape clusters.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Covariance form of each cluster or block ellipsoid.
    #[arg(long, default_value = "full")]
    mode: String,
    /// Variance fraction retained by --shape pca.
    #[arg(long, default_value_t = 0.9999)]
    variance_keep: f64,
    /// Cell width for --shape grid.
    #[arg(long, default_value_t = 1.0)]
    width: f64,
    /// Number of coordinate blocks for --shape blocks.
    #[arg(long, default_value_t = 1)]
    blocks: usize,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
}

#[derive(Args)]
struct SolveArgs {
    /// Problem specification (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Use a saved prediction set (output of `fit`) instead of fitting one.
    #[arg(long, conflicts_with = "data")]
    set: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    header: bool,
    #[arg(long, default_value_t = 0.5)]
    split: f64,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    shape: ShapeArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    RhsGap,
    StdDev,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    spec: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, value_enum, default_value = "rhs-gap")]
    scale: ScaleArg,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment file (JSON).
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment by name.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Maximum number of worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Only run the arms with these labels.
    #[arg(long, value_delimiter = ',')]
    arms: Vec<String>,
    /// Write per-replication records to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Print the experiment definition instead of running it.
    #[arg(long)]
    print_config: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Sdpa,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

fn read(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    emit(&(serde_json::to_string_pretty(v).expect("json value serializes") + "\n"))
}

fn shape_config(a: &ShapeArgs) -> Result<ShapeConfig> {
    let ridge = a.ridge;
    let mode: EllipsoidMode = a.mode.parse()?;
    Ok(match a.shape {
        ShapeKind::Ellipsoid => ShapeConfig::Ellipsoid {
            mode: EllipsoidMode::Full,
            ridge,
        },
        ShapeKind::Diag => ShapeConfig::Ellipsoid {
            mode: EllipsoidMode::Diag,
            ridge,
        },
        ShapeKind::Ball => ShapeConfig::Ellipsoid {
            mode: EllipsoidMode::Ball,
            ridge,
        },
        ShapeKind::Polytope => ShapeConfig::PolytopeBox,
        ShapeKind::Clusters => ShapeConfig::Clusters {
            k: a.k,
            mode,
            ridge,
        },
        ShapeKind::Pca => ShapeConfig::Pca {
            variance_keep: a.variance_keep,
            ridge,
        },
        ShapeKind::Basis => ShapeConfig::BallBasis,
        ShapeKind::Grid => ShapeConfig::Grid { width: a.width },
        ShapeKind::Blocks => ShapeConfig::BlockEllipsoids {
            blocks: a.blocks,
            mode,
            ridge,
        },
    })
}

fn load_split(
    path: &Path,
    header: bool,
    split: f64,
    n1: Option<usize>,
    seed: u64,
) -> Result<DataSplit> {
    let data = Dataset::read_csv(path, header)?;
    let n1 = match n1 {
        Some(n1) => n1,
        None => {
            if !(split > 0.0 && split < 1.0) {
                return Err(Error::InvalidArgument("--split must lie in (0, 1)".into()));
            }
            (data.n() as f64 * split).round() as usize
        }
    };
    split_data(&data, n1, seed)
}

fn fitted_set(
    split: &DataSplit,
    shape: &ShapeArgs,
    seed: u64,
    eps: f64,
    delta: f64,
) -> Result<PredictionSet> {
    let fitted = fit_shape(&shape_config(shape)?, &split.phase1, seed)?;
    build_prediction_set(fitted, &split.phase2, eps, delta)
}

fn set_for(a: &SolveArgs, spec: &CcpSpec) -> Result<PredictionSet> {
    match (&a.set, &a.data) {
        (Some(p), _) => Ok(serde_json::from_str(&read(p)?)?),
        (None, Some(d)) => {
            let split = load_split(d, a.header, a.split, a.n1, a.seed)?;
            fitted_set(&split, &a.shape, a.seed, spec.epsilon, spec.delta)
        }
        (None, None) => Err(Error::InvalidArgument(
            "either --data or --set is required".into(),
        )),
    }
}

fn calibrate(a: &CalibrateArgs) -> Result<()> {
    let values: Option<Vec<f64>> = match &a.values {
        Some(p) => Some(
            read(p)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(|l| {
                    l.parse::<f64>()
                        .map_err(|e| Error::InvalidArgument(format!("{l:?}: {e}")))
                })
                .collect::<Result<_>>()?,
        ),
        None => None,
    };
    let n2 = match (a.n2, &values) {
        (Some(n), Some(v)) if n != v.len() => {
            return Err(Error::InvalidArgument(format!(
                "--n2 {n} but {} values given",
                v.len()
            )))
        }
        (Some(n), _) => n,
        (None, Some(v)) => v.len(),
        (None, None) => {
            return Err(Error::InvalidArgument(
                "--n2 or --values is required".into(),
            ))
        }
    };
    let n2_min = min_phase2_size(a.eps, a.delta)?;
    let i_star = calib_index_upper(n2, a.eps, a.delta)?;
    let (s, ties) = match &values {
        Some(v) => {
            let c = calibrate_size(v, a.eps, a.delta)?;
            (Some(c.s), Some(c.tie_warning))
        }
        None => (None, None),
    };
    print_json(&json!({
        "n2_min": n2_min,
        "n2": n2,
        "i_star": i_star,
        "s": s,
        "tie_warning": ties,
        "theoretical_confidence": theoretical_confidence(n2, a.eps, a.delta)?,
    }))
}

fn fit(a: &FitArgs) -> Result<()> {
    let d = &a.data;
    let split = load_split(&d.data, d.header, d.split, d.n1, d.seed)?;
    let set = fitted_set(&split, &a.shape, d.seed, a.eps, a.delta)?;
    print_json(&serde_json::to_value(&set)?)
}

fn solve(a: &SolveArgs) -> Result<()> {
    let spec = CcpSpec::from_json(&read(&a.spec)?)?;
    let set = set_for(a, &spec)?;
    let r = solve_robust(&spec, &set)?;
    let optimal = r.status == SolveStatus::Optimal;
    print_json(&json!({
        "status": r.status,
        "objective": optimal.then_some(r.objective),
        "x": optimal.then_some(&r.x),
        "shape": set.shape.name(),
        "size": set.size,
        "i_star": set.calib.as_ref().map(|c| c.i_star),
    }))
}

fn reconstruct(a: &ReconstructArgs) -> Result<()> {
    let spec = CcpSpec::from_json(&read(&a.spec)?)?;
    let d = &a.data;
    let split = load_split(&d.data, d.header, d.split, d.n1, d.seed)?;
    let policy = match a.scale {
        ScaleArg::RhsGap => ScalePolicy::RhsGap,
        ScaleArg::StdDev => ScalePolicy::StdDev,
    };
    let out = reconstruction_pipeline(&split, &spec, &shape_config(&a.shape)?, policy, d.seed)?;
    if !out.fallback_rows.is_empty() {
        eprintln!(
            "rows {:?} had a nonpositive gap scale and use the standard deviation",
            out.fallback_rows
        );
    }
    print_json(&serde_json::to_value(&out)?)
}

fn table1() -> Result<()> {
    let rows = sample_size_table(&SAMPLE_SIZE_GRID, &SAMPLE_SIZE_DIMS)?;
    let mut header = vec!["epsilon".to_string(), "delta".into(), "ro".into()];
    header.extend(SAMPLE_SIZE_DIMS.iter().map(|d| format!("sg_d{d}")));
    let mut text = header.join(",") + "\n";
    for r in rows {
        let mut cells = vec![r.epsilon.to_string(), r.delta.to_string(), r.ro.to_string()];
        cells.extend(r.sg.iter().map(usize::to_string));
        text.push_str(&(cells.join(",") + "\n"));
    }
    emit(&text)
}

fn experiment(a: &ExperimentArgs) -> Result<()> {
    let mut suite = match (&a.config, &a.preset) {
        (Some(p), _) => ExperimentSuite::from_json(&read(p)?)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => unreachable!("clap requires one of --config and --preset"),
    };
    if !a.arms.is_empty() {
        if let Some(missing) = a
            .arms
            .iter()
            .find(|l| !suite.arms.iter().any(|arm| &arm.label == *l))
        {
            return Err(Error::InvalidArgument(format!(
                "no arm labelled {missing:?}"
            )));
        }
        suite.arms.retain(|arm| a.arms.contains(&arm.label));
    }
    if a.print_config {
        return emit(&(suite.to_json() + "\n"));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = a.jobs {
        if j == 0 {
            return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let mut reports = Vec::new();
    for config in suite.configs() {
        eprintln!("running {} ({} replications)", config.label, a.reps);
        reports
            .push(pool.install(|| lbro_core::harness::run_replications(&config, a.reps, a.seed))?);
    }
    if let Some(path) = &a.csv {
        let mut text = String::new();
        for (i, r) in reports.iter().enumerate() {
            let csv = r.to_csv();
            // keep a single header line
            text.push_str(if i == 0 {
                &csv
            } else {
                csv.split_once('\n').map_or("", |(_, rest)| rest)
            });
        }
        std::fs::write(path, text)?;
    }
    let summaries: Vec<_> = reports.iter().map(|r| &r.summary).collect();
    print_json(&json!({
        "name": suite.name,
        "reps": a.reps,
        "seed": a.seed,
        "arms": summaries,
    }))
}

fn export_cmd(a: &ExportArgs) -> Result<()> {
    let spec = CcpSpec::from_json(&read(&a.solve.spec)?)?;
    let set = set_for(&a.solve, &spec)?;
    let rp = assemble_ro(&spec, &set)?;
    let format = match a.format {
        FormatArg::Json => ExportFormat::Json,
        FormatArg::Sdpa => ExportFormat::Sdpa,
    };
    let mut text = export(&rp.program, format)?;
    if format == ExportFormat::Json {
        text.push('\n');
    }
    emit(&text)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Calibrate(a) => calibrate(a),
        Command::Fit(a) => fit(a),
        Command::Solve(a) => solve(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Table1 => table1(),
        Command::Experiment(a) => experiment(a),
        Command::Export(a) => export_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{body}");
            ExitCode::from(1)
        }
    }
}
