//! Command-line interface: training runs, multi-seed sweeps, reference-grid
//! generation, and report aggregation.
//!
//! Exit codes: 0 success, 2 usage/configuration error, 3 diverged run,
//! 4 i/o failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sobolev_pinn::error::Error;
use sobolev_pinn::loss::LossVariant;
use sobolev_pinn::problems::ProblemDef;
use sobolev_pinn::reference::{fp_solve, fp_suggested_steps};
use sobolev_pinn::report;
use sobolev_pinn::train::{
    sweep_full, train, write_record_files, write_sweep_files, SamplingMode, TrainConfig,
};

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "SOBOLEV_PINN_OUT";

#[derive(Parser)]
#[command(
    name = "sobolev-pinn",
    about = "Train physics-informed neural networks with Sobolev-norm losses",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a single network and write its record files.
    Train(TrainArgs),
    /// Run one config across many seeds and write summary files.
    Sweep(SweepArgs),
    /// Solve a kinetic reference grid and write it to a file.
    Reference(ReferenceArgs),
    /// Aggregate run records in a directory into a summary table.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct CommonTrainArgs {
    /// Problem name (heat, burgers, fp-f1, fp-f2, poisson-d10-k1,
    /// toy-sin-k3, ...).
    #[arg(long)]
    problem: Option<String>,
    /// Loss variant (hb0..hb2, fp0..fp1, po0..po2, toy-l2/h1/h2).
    #[arg(long)]
    loss: Option<String>,
    /// JSON config file mirroring the TrainConfig fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hidden layer widths, comma separated (default 64,64).
    #[arg(long, value_delimiter = ',')]
    arch: Option<Vec<usize>>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Epoch budget.
    #[arg(long)]
    epochs: Option<u64>,
    /// Test-error threshold that stops training.
    #[arg(long)]
    threshold: Option<f64>,
    /// Test-error evaluation stride in epochs.
    #[arg(long)]
    stride: Option<u64>,
    /// Sampling mode: fixed or iterative.
    #[arg(long)]
    sampling: Option<String>,
    /// Fixed-grid counts N_t, N_x, N_B (and N_v for kinetic problems).
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nb: Option<usize>,
    #[arg(long)]
    nv: Option<usize>,
    /// Iterative-mode interior points per epoch.
    #[arg(long)]
    points_per_epoch: Option<usize>,
    /// Iterative-mode boundary points per epoch.
    #[arg(long)]
    boundary_per_epoch: Option<usize>,
    /// Reference-grid file for kinetic test error (solved on the fly when
    /// absent).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Output directory (default from SOBOLEV_PINN_OUT, then ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonTrainArgs,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonTrainArgs,
    /// Number of seeds (runs), starting at --seed-base.
    #[arg(long)]
    seeds: usize,
    /// First seed of the sweep.
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Parallel jobs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ReferenceArgs {
    /// Kinetic problem name (fp-f1 or fp-f2).
    #[arg(long)]
    problem: String,
    /// Cells in x.
    #[arg(long, default_value_t = 128)]
    nx: usize,
    /// Cells in v.
    #[arg(long, default_value_t = 256)]
    nv: usize,
    /// Time steps (defaults to the stability bound).
    #[arg(long)]
    nt: Option<usize>,
    /// Snapshot count.
    #[arg(long, default_value_t = 31)]
    snapshots: usize,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory of run record JSON files.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output format: text or csv.
    #[arg(long, default_value = "text")]
    format: String,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::MalformedFile { .. } | Error::Json(_) => 4,
        _ => 2,
    }
}

fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Builds the effective config: file (when given), then flag overrides.
fn build_config(
    common: &CommonTrainArgs,
    loss_name: &str,
    seed: u64,
) -> Result<TrainConfig, Error> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<TrainConfig>(&text)?
        }
        None => {
            let problem = common.problem.as_deref().ok_or_else(|| {
                Error::InvalidConfig("--problem is required (or use --config)".into())
            })?;
            TrainConfig::new(problem, LossVariant::parse(loss_name)?)?
        }
    };
    if let Some(problem) = &common.problem {
        if common.config.is_some() {
            // switching problems needs fresh defaults
            let loss = LossVariant::parse(loss_name).unwrap_or(config.loss);
            let fresh = TrainConfig::new(problem, loss)?;
            config.problem = fresh.problem;
            config.sampling = fresh.sampling;
            config.metric = fresh.metric;
        }
    }
    if !loss_name.is_empty() {
        config.loss = LossVariant::parse(loss_name)?;
    }
    if let Some(hidden) = &common.arch {
        config.hidden = hidden.clone();
    }
    if let Some(lr) = common.lr {
        config.optimizer.learning_rate = lr;
    }
    if let Some(epochs) = common.epochs {
        config.epochs = epochs;
    }
    if let Some(threshold) = common.threshold {
        config.threshold = threshold;
    }
    if let Some(stride) = common.stride {
        config.eval_stride = stride;
    }
    config.seed = seed;
    config.reference = common.reference.clone().or(config.reference);
    match common.sampling.as_deref() {
        None => {}
        Some("fixed") => {
            if !matches!(config.sampling, SamplingMode::FixedGrid { .. }) {
                config.sampling = SamplingMode::FixedGrid {
                    n_t: 31,
                    n_x: 31,
                    n_b: 31,
                    n_v: None,
                };
            }
        }
        Some("iterative") => {
            if !matches!(config.sampling, SamplingMode::Iterative { .. }) {
                config.sampling = SamplingMode::Iterative {
                    points_per_epoch: 500,
                    boundary_per_epoch: 500,
                };
            }
        }
        Some(other) => {
            return Err(Error::InvalidConfig(format!(
                "unknown sampling mode {other:?} (fixed|iterative)"
            )))
        }
    }
    match &mut config.sampling {
        SamplingMode::FixedGrid { n_t, n_x, n_b, n_v } => {
            if let Some(v) = common.nt {
                *n_t = v;
            }
            if let Some(v) = common.nx {
                *n_x = v;
            }
            if let Some(v) = common.nb {
                *n_b = v;
            }
            if common.nv.is_some() {
                *n_v = common.nv;
            }
        }
        SamplingMode::Iterative {
            points_per_epoch,
            boundary_per_epoch,
        } => {
            if let Some(v) = common.points_per_epoch {
                *points_per_epoch = v;
            }
            if let Some(v) = common.boundary_per_epoch {
                *boundary_per_epoch = v;
            }
        }
    }
    Ok(config)
}

fn cmd_train(args: &TrainArgs) -> Result<u8, Error> {
    let loss_name = args.common.loss.clone().unwrap_or_default();
    let config = build_config(&args.common, &loss_name, args.seed.unwrap_or(0))?;
    // validate names early for a friendly usage error
    ProblemDef::by_name(&config.problem)?;
    let dir = out_dir(&args.common.out);
    let (record, params) = train(&config)?;
    let record = write_record_files(&record, &params, &dir, config.seed as usize)?;
    let label = match (record.epochs_to_threshold, record.diverged) {
        (_, true) => "diverged",
        (Some(_), _) => "reached threshold",
        (None, _) => "finished",
    };
    println!(
        "{} {} seed {}: {} after {} epochs, final error {:.3e}, {:.1}s → {}",
        config.problem,
        config.loss,
        config.seed,
        label,
        record
            .epochs_to_threshold
            .unwrap_or(record.loss_series.len() as u64),
        record.final_error,
        record.wall_seconds,
        dir.display(),
    );
    Ok(if record.diverged { 3 } else { 0 })
}

fn cmd_sweep(args: &SweepArgs) -> Result<u8, Error> {
    if args.seeds == 0 {
        return Err(Error::InvalidConfig("--seeds must be ≥ 1".into()));
    }
    let losses: Vec<String> = args
        .common
        .loss
        .as_deref()
        .unwrap_or_default()
        .split(',')
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if losses.is_empty() {
        return Err(Error::InvalidConfig("--loss is required".into()));
    }
    let dir = out_dir(&args.common.out);
    let mut any_diverged = false;
    for loss_name in &losses {
        let mut config = build_config(&args.common, loss_name, args.seed_base)?;
        config.seed = args.seed_base;
        let (runs, summary) = sweep_full(&config, args.seeds, args.jobs)?;
        let label = format!("{}_{}", config.problem, config.loss);
        let sub = dir.join(&label);
        let mut records = Vec::with_capacity(runs.len());
        for (i, (record, params)) in runs.iter().enumerate() {
            records.push(write_record_files(record, params, &sub, i)?);
        }
        write_sweep_files(&records, &summary, &dir, &label)?;
        any_diverged |= summary.n_diverged > 0;
        println!(
            "{label}: {} runs, mean epochs {}, mean error {:.3e} (diverged {}, unreached {})",
            summary.n_runs,
            summary
                .mean_epochs
                .map(|m| format!("{m:.0}"))
                .unwrap_or_else(|| "-".into()),
            summary.mean_final_error,
            summary.n_diverged,
            summary.n_unreached,
        );
    }
    Ok(if any_diverged { 3 } else { 0 })
}

fn cmd_reference(args: &ReferenceArgs) -> Result<u8, Error> {
    let problem = ProblemDef::by_name(&args.problem)?;
    let suggested = fp_suggested_steps(&problem, args.nx, args.nv).map_err(|_| {
        Error::InvalidConfig(format!(
            "problem {:?} has a closed-form solution and needs no grid",
            args.problem
        ))
    })?;
    let n_t = args.nt.unwrap_or(suggested);
    let grid = fp_solve(&problem, (args.nx, args.nv, n_t), args.snapshots)?;
    grid.save(&args.out)?;
    println!(
        "{}: {}×{} cells, {} steps, {} snapshots → {} (relative mass drift {:.2e})",
        args.problem,
        args.nx,
        args.nv,
        grid.n_steps,
        args.snapshots,
        args.out.display(),
        grid.mass_drift_rel,
    );
    Ok(0)
}

fn cmd_report(args: &ReportArgs) -> Result<u8, Error> {
    let rows = report::collect(Path::new(&args.input))?;
    match args.format.as_str() {
        "csv" => print!("{}", report::to_csv(&rows)),
        "text" => print!("{}", report::to_text(&rows)),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown format {other:?} (text|csv)"
            )))
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Reference(args) => cmd_reference(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            if matches!(err, Error::UnknownProblem { .. }) {
                eprintln!("known problems: {}", ProblemDef::catalog_summary());
            }
            ExitCode::from(exit_code_for(&err))
        }
    }
}
