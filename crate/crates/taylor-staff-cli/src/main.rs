//! Command-line front end: simulation, fitting, staffing, evaluation,
//! and bundled reproduction pipelines over the taylor-staff library.
//!
//! Every command is deterministic given --seed; replication loops run on
//! a thread pool whose size never changes the results. Exit codes: 0
//! success, 2 usage errors, 3 invalid input or I/O failure, 4 numerical
//! non-convergence.

mod commands;
mod config;

use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;
use taylor_staff::Error;

#[derive(Parser, Debug)]
#[command(
    name = "taylor-staff",
    version,
    about = "Over-dispersed arrival modeling, model fitting, and staffing rules"
)]
struct Cli {
    /// Plain-text `key = value` file supplying defaults for the
    /// subcommand's flags; explicit flags and environment values win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Root random seed for all stochastic work.
    #[arg(long, global = true, env = "TAYLOR_STAFF_SEED", default_value_t = 0)]
    seed: u64,

    /// Worker threads for replication loops; 0 means all cores. Results
    /// are identical for any thread count.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate arrival paths, an optional count matrix, and a pooled
    /// queueing delay estimate.
    Simulate(SimulateArgs),
    /// Fit arrival models to a count matrix and rank them by AIC/BIC.
    Fit(FitArgs),
    /// Compute a staffing level under one of the safety rules.
    Staff(StaffArgs),
    /// Evaluate a staffing profile against an arrival stream, or run the
    /// variance-mean power-law regression on a count matrix.
    Evaluate(EvaluateArgs),
    /// Re-run the bundled staffing-table and exceedance pipelines.
    Repro(ReproArgs),
}

/// Arrival-model parameters shared by generation commands. Which fields
/// are required depends on the model: m1 none, m2 sigma-g, m3 alpha and
/// sigma-y, m4 kappa and sigma, m5 alpha, kappa, and sigma.
#[derive(Args, Debug, Clone)]
struct ModelFlags {
    /// Arrival model: m1 (Poisson), m2 (random busyness), m3 (static
    /// power-law noise), m4 (mean-reverting intensity), m5 (generalized
    /// mean-reverting intensity).
    #[arg(long)]
    model: String,

    /// Mean arrival rate per time unit.
    #[arg(long)]
    lambda: f64,

    /// Power-law exponent in [0, 1].
    #[arg(long)]
    alpha: Option<f64>,

    /// Mean-reversion speed of the intensity.
    #[arg(long)]
    kappa: Option<f64>,

    /// Intensity volatility.
    #[arg(long)]
    sigma: Option<f64>,

    /// Static power-law noise scale.
    #[arg(long = "sigma-y")]
    sigma_y: Option<f64>,

    /// Busyness-factor standard deviation.
    #[arg(long = "sigma-g")]
    sigma_g: Option<f64>,
}

/// Service-time distribution flags.
#[derive(Args, Debug, Clone)]
struct ServiceFlags {
    /// Service rate mu; the mean service time is 1/mu.
    #[arg(long, default_value_t = 6.0)]
    mu: f64,

    /// Service-time family: exp, lognormal, or gamma.
    #[arg(long, default_value = "exp")]
    service: String,

    /// Service-time standard deviation (lognormal and gamma only).
    #[arg(long = "service-sd")]
    service_sd: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelFlags,

    /// Path horizon in time units.
    #[arg(long)]
    horizon: f64,

    /// Independent replications.
    #[arg(long, default_value_t = 1)]
    reps: usize,

    /// Output directory for the path files and estimates.
    #[arg(long = "out-dir", default_value = ".")]
    out_dir: PathBuf,

    /// Also write counts.csv, counting arrivals per interval of this
    /// length; must divide the horizon evenly.
    #[arg(long = "counts-delta")]
    counts_delta: Option<f64>,

    #[command(flatten)]
    service: ServiceFlags,

    /// Server count for the queueing run; infinite when omitted.
    #[arg(long)]
    servers: Option<u64>,

    /// Occupancy threshold for the delay estimate; defaults to the
    /// offered load ceil(lambda/mu).
    #[arg(long)]
    threshold: Option<u64>,

    /// Warm-up time before the first probe.
    #[arg(long, default_value_t = 0.0)]
    warmup: f64,

    /// Spacing of the delay-estimate probes.
    #[arg(long = "probe-step", default_value_t = 1.0)]
    probe_step: f64,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Count-matrix CSV (header row of segment indices).
    #[arg(long)]
    input: PathBuf,

    /// Counting-interval length of the input columns.
    #[arg(long)]
    delta: f64,

    /// Comma-separated list of models to fit.
    #[arg(long, value_delimiter = ',', default_value = "m1,m2,m3,m4,m5")]
    models: Vec<String>,

    /// Fix segment rates by the SIPP estimator first, then fit the
    /// remaining parameters against the non-stationary moments.
    #[arg(long = "two-step", action = ArgAction::SetTrue)]
    two_step: bool,

    /// SIPP variant for --two-step: avg, min, max, or mix.
    #[arg(long, default_value = "avg")]
    sipp: String,

    /// Sub-intervals per staffing segment in the input columns.
    #[arg(long = "sub-intervals", default_value_t = 1)]
    sub_intervals: usize,

    /// Randomized optimizer restarts beyond the deterministic start.
    #[arg(long, default_value_t = 5)]
    restarts: usize,

    /// Total objective-evaluation budget across restarts.
    #[arg(long = "max-evals", default_value_t = 10_000)]
    max_evals: usize,

    /// Optimize the mean rate jointly instead of profiling it out.
    #[arg(long = "joint-lambda", action = ArgAction::SetTrue)]
    joint_lambda: bool,

    /// Fit-results CSV path.
    #[arg(long, default_value = "fits.csv")]
    out: PathBuf,

    /// Ranking CSV path (written when two or more models are fitted).
    #[arg(long = "ranking-out")]
    ranking_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StaffArgs {
    /// Staffing rule: sqrt, sqrt-cir, linear, alpha-static, basic-alpha,
    /// or refined-alpha.
    #[arg(long)]
    rule: String,

    /// Mean arrival rate of the system to staff.
    #[arg(long)]
    lambda: f64,

    /// Delay-probability target in (0, 1).
    #[arg(long)]
    eps: f64,

    #[command(flatten)]
    service: ServiceFlags,

    /// Power-law exponent (alpha-static, basic-alpha, refined-alpha).
    #[arg(long)]
    alpha: Option<f64>,

    /// Mean-reversion speed (sqrt-cir, basic-alpha, refined-alpha).
    #[arg(long)]
    kappa: Option<f64>,

    /// Intensity volatility (sqrt-cir, basic-alpha, refined-alpha).
    #[arg(long)]
    sigma: Option<f64>,

    /// Static noise scale (alpha-static).
    #[arg(long = "sigma-y")]
    sigma_y: Option<f64>,

    /// Busyness standard deviation (linear).
    #[arg(long = "sigma-g")]
    sigma_g: Option<f64>,

    /// Decisions CSV path.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Iteration-trace CSV for the refined rule.
    #[arg(long)]
    trace: Option<PathBuf>,

    /// Arrival rate of the refined-rule calibration system.
    #[arg(long = "sim-lambda", default_value_t = 100.0)]
    sim_lambda: f64,

    /// Horizon of each calibration replication.
    #[arg(long = "sim-horizon", default_value_t = 24.0)]
    sim_horizon: f64,

    /// Replications per calibration iteration.
    #[arg(long = "sim-reps", default_value_t = 100)]
    sim_reps: usize,

    /// Iteration cap for the calibration search.
    #[arg(long = "max-iters", default_value_t = 200)]
    max_iters: usize,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Run the variance-mean power-law regression on --input and print
    /// the fitted exponent instead of a queueing evaluation.
    #[arg(long, action = ArgAction::SetTrue)]
    taylor: bool,

    /// Count-matrix CSV for --taylor.
    #[arg(long)]
    input: Option<PathBuf>,

    /// Counting-interval length for --taylor.
    #[arg(long)]
    delta: Option<f64>,

    /// Arrival-stream CSV (cycle, timestamp); each cycle is one
    /// independent stream spanning --cycles periods. Alternative to
    /// generating streams from --model.
    #[arg(long)]
    arrivals: Option<PathBuf>,

    /// Arrival model for generated streams (with the model flags below).
    #[arg(long)]
    model: Option<String>,

    /// Mean arrival rate for generated streams.
    #[arg(long)]
    lambda: Option<f64>,

    /// Power-law exponent in [0, 1].
    #[arg(long)]
    alpha: Option<f64>,

    /// Mean-reversion speed of the intensity.
    #[arg(long)]
    kappa: Option<f64>,

    /// Intensity volatility.
    #[arg(long)]
    sigma: Option<f64>,

    /// Static power-law noise scale.
    #[arg(long = "sigma-y")]
    sigma_y: Option<f64>,

    /// Busyness-factor standard deviation.
    #[arg(long = "sigma-g")]
    sigma_g: Option<f64>,

    /// Staffing periods each stream spans; probes pool across them.
    #[arg(long, default_value_t = 1)]
    cycles: usize,

    /// Independent streams to generate and pool.
    #[arg(long, default_value_t = 1)]
    reps: usize,

    /// Staffing-profile CSV (segment_start, n) covering one period.
    #[arg(long)]
    profile: Option<PathBuf>,

    /// Flat server count over a 24-hour period; alternative to --profile.
    #[arg(long)]
    servers: Option<u64>,

    #[command(flatten)]
    service: ServiceFlags,

    /// Probe spacing within the period.
    #[arg(long = "probe-step", default_value_t = 1.0)]
    probe_step: f64,

    /// Output CSV: the delay curve (default delay.csv), or the power-law
    /// fit row under --taylor (written only when given).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReproArgs {
    /// Output directory for the pipeline artifacts.
    #[arg(long = "out-dir")]
    out_dir: PathBuf,

    /// Replications for the exceedance pipeline.
    #[arg(long, default_value_t = 20)]
    reps: usize,

    /// Also run the large-system exceedance pipeline and the refined-rule
    /// calibration (combine with --reps 200 for full scale).
    #[arg(long, action = ArgAction::SetTrue)]
    full: bool,
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    // Lenient first pass: locate --config and the subcommand without
    // enforcing required flags, which the config file may yet supply.
    let peek = Cli::command().ignore_errors(true).try_get_matches_from(&argv).ok();
    let config_path = peek.as_ref().and_then(|m| m.get_one::<PathBuf>("config").cloned());
    let argv = match (&config_path, &peek) {
        (Some(path), Some(matches)) => match config::merged_argv(matches, path, &argv) {
            Ok(merged) => merged,
            Err(e) => return fail(e),
        },
        _ => argv,
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::NonConvergence(_) => ExitCode::from(4),
        _ => ExitCode::from(3),
    }
}
