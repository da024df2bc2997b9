//! spacetsiv command line: ingestion, marginal-to-joint conversion, sparse
//! two-sample IV estimation, identifiability diagnostics, and the
//! simulation harness.
//!
//! Exit codes: 0 success, 2 input/parse error, 3 numerical failure,
//! 4 usage error.

mod plot;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spacetsiv::chi2::chi2_cdf;
use spacetsiv::estimators::{ConfidenceInterval, Decision, SpaceTsivResult, TrajectoryStep};
use spacetsiv::identifiability;
use spacetsiv::simulate::{DgpName, EstimatorName, ExperimentConfig, MetricsRow};
use spacetsiv::sumstats::io as sumio;
use spacetsiv::{
    ci_by_inversion, default_lambda_path, level_test, q_statistic, spacetsiv_l0, spacetsiv_l1,
    tsiv, FitResult, JointSummaryStats, SupportSet,
};

#[derive(Parser)]
#[command(name = "spacetsiv", version, about = "Sparse causal effect estimation from two-sample GWAS summary statistics")]
struct Cli {
    /// Verbosity: -v for progress, -vv for per-subset Q values.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Worker threads for parallel estimator internals (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert marginal TSV/CSV summary statistics to a joint JSON document.
    Convert(ConvertArgs),
    /// spaceTSIV with L0 penalization (exhaustive subset selection).
    FitL0(FitL0Args),
    /// spaceTSIV with L1 penalization (lasso path plus refit).
    FitL1(FitL1Args),
    /// Plain TSIV: pseudo-inverse estimate without sparsity.
    Tsiv(TsivArgs),
    /// Identifiability diagnostics for a candidate parent set.
    Diagnose(DiagnoseArgs),
    /// Simulation harness: benchmark processes and metric sweeps.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct ConvertArgs {
    /// Outcome TSV with columns snp, beta, se.
    #[arg(long)]
    outcome: PathBuf,
    /// Exposure TSV with columns snp, beta_<id>, se_<id>, ...
    #[arg(long)]
    exposure: PathBuf,
    /// Shared instrument correlation CSV (used for both studies).
    #[arg(long, conflicts_with_all = ["ld_outcome", "ld_exposure"])]
    ld: Option<PathBuf>,
    /// Outcome-study instrument correlation CSV.
    #[arg(long, requires = "ld_exposure")]
    ld_outcome: Option<PathBuf>,
    /// Exposure-study instrument correlation CSV.
    #[arg(long, requires = "ld_outcome")]
    ld_exposure: Option<PathBuf>,
    /// Covariate correlation CSV.
    #[arg(long)]
    x_corr: PathBuf,
    /// Outcome-study sample size.
    #[arg(long)]
    n_outcome: usize,
    /// Exposure-study sample size.
    #[arg(long)]
    n_exposure: usize,
    /// Treat file standard errors as n-2-corrected and rescale.
    #[arg(long)]
    df_corrected: bool,
    /// Output path of the joint JSON document.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitCommon {
    /// Joint summary-statistics JSON.
    #[arg(long)]
    joint: PathBuf,
    /// Level of the acceptance test.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Also invert the test into per-coordinate confidence intervals at
    /// this confidence level.
    #[arg(long, num_args = 0..=1, default_missing_value = "0.90")]
    ci: Option<f64>,
    /// Output path of the result JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitL0Args {
    #[command(flatten)]
    common: FitCommon,
    /// Largest support size to sweep (default min(d, m)).
    #[arg(long)]
    s_max: Option<usize>,
}

#[derive(Args)]
struct FitL1Args {
    #[command(flatten)]
    common: FitCommon,
    /// Explicit decreasing penalty path, comma separated.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Points on the default geometric path.
    #[arg(long, default_value_t = 100)]
    n_lambdas: usize,
}

#[derive(Args)]
struct TsivArgs {
    #[command(flatten)]
    common: FitCommon,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Joint summary-statistics JSON (uses its big_pi matrix).
    #[arg(long)]
    joint: PathBuf,
    /// Candidate parent set, comma-separated 0-based indices.
    #[arg(long, value_delimiter = ',')]
    pa: Vec<usize>,
    /// Relative SVD tolerance.
    #[arg(long, default_value_t = identifiability::DEFAULT_TOLERANCE)]
    tol: f64,
    /// Optional output path; the report always prints to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Benchmark process: dgp1, dgp2 or dgp3.
    #[arg(long)]
    dgp: String,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
    n_grid: Vec<usize>,
    /// Repetitions per sample size.
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Estimators to run, comma separated (l0, l1, tsiv).
    #[arg(long, value_delimiter = ',', default_value = "l0,l1,tsiv")]
    estimators: Vec<String>,
    /// Metrics CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Optional SVG with rmse / Jaccard / correct-size panels.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Use exact population statistics instead of sampling.
    #[arg(long)]
    exact_population: bool,
    /// Largest L0 support size (default min(d, m)).
    #[arg(long)]
    s_max: Option<usize>,
}

struct AppError {
    message: String,
    code: u8,
}

impl AppError {
    fn usage(message: impl Into<String>) -> AppError {
        AppError {
            message: message.into(),
            code: 4,
        }
    }

    fn input(message: impl Into<String>) -> AppError {
        AppError {
            message: message.into(),
            code: 2,
        }
    }
}

impl From<spacetsiv::Error> for AppError {
    fn from(err: spacetsiv::Error) -> AppError {
        let code = if err.is_numerical() { 3 } else { 2 };
        AppError {
            message: err.to_string(),
            code,
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(err: std::io::Error) -> AppError {
        AppError {
            message: err.to_string(),
            code: 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 4,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    if let Some(threads) = cli.threads {
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            log::warn!("could not configure thread pool: {err}");
        }
    }

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn run(command: Command) -> Result<(), AppError> {
    match command {
        Command::Convert(args) => cmd_convert(args),
        Command::FitL0(args) => cmd_fit_l0(args),
        Command::FitL1(args) => cmd_fit_l1(args),
        Command::Tsiv(args) => cmd_tsiv(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Simulate(args) => cmd_simulate(args),
    }
}

fn cmd_convert(args: ConvertArgs) -> Result<(), AppError> {
    let ld = match (&args.ld, &args.ld_outcome, &args.ld_exposure) {
        (Some(shared), None, None) => sumio::LdInput::Shared(shared),
        (None, Some(a), Some(b)) => sumio::LdInput::Separate {
            outcome: a,
            exposure: b,
        },
        _ => {
            return Err(AppError::usage(
                "provide either --ld or both --ld-outcome and --ld-exposure",
            ))
        }
    };
    let marg = sumio::assemble_marginal(
        &args.outcome,
        &args.exposure,
        ld,
        &args.x_corr,
        args.n_outcome,
        args.n_exposure,
        args.df_corrected,
    )?;
    let joint = spacetsiv::marginal_to_joint(&marg)?;
    sumio::write_joint_json_file(&joint, &args.out)?;
    println!(
        "m={} d={} n_a={} n_b={}",
        joint.m(),
        joint.d(),
        joint.n_a(),
        joint.n_b()
    );
    Ok(())
}

fn validate_alpha(alpha: f64) -> Result<(), AppError> {
    if alpha <= 0.0 || alpha >= 1.0 {
        return Err(AppError::usage(format!("--alpha {alpha} must be in (0, 1)")));
    }
    Ok(())
}

fn intervals_if_requested(
    joint: &JointSummaryStats,
    support: &SupportSet,
    ci_level: Option<f64>,
) -> Result<Vec<ConfidenceInterval>, AppError> {
    let Some(level) = ci_level else {
        return Ok(vec![]);
    };
    if level <= 0.0 || level >= 1.0 {
        return Err(AppError::usage(format!("--ci level {level} must be in (0, 1)")));
    }
    if support.is_empty() {
        log::warn!("selected support is empty; no confidence intervals computed");
        return Ok(vec![]);
    }
    Ok(ci_by_inversion(joint, support, 1.0 - level)?)
}

fn write_result(
    out: &PathBuf,
    result: &SpaceTsivResult,
    intervals: &[ConfidenceInterval],
) -> Result<(), AppError> {
    let json = result.to_json(intervals);
    let mut file = std::fs::File::create(out)?;
    serde_json::to_writer(&mut file, &json).map_err(|e| AppError::input(e.to_string()))?;
    file.write_all(b"\n")?;
    println!(
        "phi={} q_value={} p_value={} support={:?}",
        if result.phi { 1 } else { 0 },
        result.q_value,
        result.p_value,
        result.selected_support().indices()
    );
    Ok(())
}

fn cmd_fit_l0(args: FitL0Args) -> Result<(), AppError> {
    validate_alpha(args.common.alpha)?;
    let joint = sumio::read_joint_json_file(&args.common.joint)?;
    let s_max = args.s_max.unwrap_or_else(|| joint.d().min(joint.m()));
    let result = spacetsiv_l0(&joint, s_max, args.common.alpha)?;
    let intervals = intervals_if_requested(&joint, &result.selected_support(), args.common.ci)?;
    write_result(&args.common.out, &result, &intervals)
}

fn cmd_fit_l1(args: FitL1Args) -> Result<(), AppError> {
    validate_alpha(args.common.alpha)?;
    let joint = sumio::read_joint_json_file(&args.common.joint)?;
    let path = match args.lambdas {
        Some(lambdas) => lambdas,
        None => {
            let path = default_lambda_path(&joint, args.n_lambdas)?;
            log::info!(
                "using default geometric path with {} points from {:.6e}",
                path.len(),
                path.first().copied().unwrap_or(0.0)
            );
            path
        }
    };
    let result = spacetsiv_l1(&joint, &path, args.common.alpha)?;
    let intervals = intervals_if_requested(&joint, &result.selected_support(), args.common.ci)?;
    write_result(&args.common.out, &result, &intervals)
}

fn cmd_tsiv(args: TsivArgs) -> Result<(), AppError> {
    validate_alpha(args.common.alpha)?;
    let joint = sumio::read_joint_json_file(&args.common.joint)?;
    let estimate = tsiv(&joint);
    let q_value = q_statistic(&joint, &estimate)?;
    let fit = FitResult {
        beta: estimate.iter().copied().collect(),
        support: SupportSet::from_nonzero(&estimate),
        q_value,
        p_value: 1.0 - chi2_cdf(q_value, joint.m() as u32),
        converged: true,
        iterations: 0,
        df: joint.m(),
    };
    let phi = level_test(&fit, args.common.alpha);
    let result = SpaceTsivResult {
        estimate,
        phi,
        q_value: fit.q_value,
        p_value: fit.p_value,
        selected: fit.support.clone(),
        accepted_supports: vec![],
        trajectory: vec![TrajectoryStep {
            size: None,
            lambda: None,
            support: fit.support.clone(),
            q_value: fit.q_value,
            p_value: fit.p_value,
            decision: if phi {
                Decision::Rejected
            } else {
                Decision::Accepted
            },
        }],
    };
    // invert the unrestricted profile: every coordinate is free
    let intervals =
        intervals_if_requested(&joint, &SupportSet::full(joint.d()), args.common.ci)?;
    write_result(&args.common.out, &result, &intervals)
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<(), AppError> {
    let joint = sumio::read_joint_json_file(&args.joint)?;
    if args.pa.is_empty() {
        return Err(AppError::usage("--pa requires at least one index"));
    }
    let pa = SupportSet::new(args.pa)?;
    let report = identifiability::diagnose(joint.big_pi(), &pa, args.tol)?;
    let mut doc = serde_json::to_value(&report).map_err(|e| AppError::input(e.to_string()))?;
    // the remaining identifiability condition quantifies over all subsets
    // and weight vectors and is not decidable by finite rank checks
    doc["assumption_b"] = serde_json::Value::String("not-checked".into());
    doc["note"] = serde_json::Value::String(
        "diagnostics on an estimated matrix are heuristic; the conditions concern the population coefficients"
            .into(),
    );
    let text = serde_json::to_string_pretty(&doc).map_err(|e| AppError::input(e.to_string()))?;
    println!("{text}");
    if let Some(out) = args.out {
        std::fs::write(&out, format!("{text}\n"))?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), AppError> {
    let dgp: DgpName = args.dgp.parse().map_err(|e: spacetsiv::Error| AppError::usage(e.to_string()))?;
    let mut estimators = Vec::new();
    for name in &args.estimators {
        estimators.push(
            name.parse::<EstimatorName>()
                .map_err(|e| AppError::usage(e.to_string()))?,
        );
    }
    validate_alpha(args.alpha)?;
    let mut config = ExperimentConfig::new(dgp);
    config.n_grid = args.n_grid;
    config.repetitions = args.reps;
    config.estimators = estimators;
    config.alpha = args.alpha;
    config.seed = args.seed;
    config.exact_population = args.exact_population;
    config.s_max = args.s_max;

    let rows = spacetsiv::simulate::run_experiment(&config)?;
    write_metrics_csv(&rows, &args.out)?;
    if let Some(plot_path) = &args.plot {
        plot::write_metrics_svg(&rows, plot_path)?;
    }
    println!("wrote {} metric rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn write_metrics_csv(rows: &[MetricsRow], out: &PathBuf) -> Result<(), AppError> {
    let mut buf = String::new();
    buf.push_str("n,estimator,repetitions,jaccard_mean,correct_size_pct,tpr_mean,bias,rmse\n");
    for row in rows {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(";")
        };
        buf.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.n,
            row.estimator,
            row.repetitions,
            row.jaccard_mean,
            row.correct_size_pct,
            row.tpr_mean,
            join(&row.bias),
            join(&row.rmse),
        ));
    }
    std::fs::write(out, buf)?;
    Ok(())
}
