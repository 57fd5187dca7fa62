use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use csdl::harness::config::FileConfig;
use csdl::harness::{
    run_experiment, run_fit, summarize_file, ExperimentConfig, ExperimentKind, FitOptions, FitPenalty,
    Profile,
};
use csdl::{CsdlError, NoiseKind, Result};

#[derive(Parser)]
#[command(name = "csdl", version, about = "Convolutional sparse dictionary learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error against signal length N (iid Gaussian noise)
    Exp1(ExpArgs),
    /// Error against atom length n under iid and correlated noise
    Exp2(ExpArgs),
    /// Error against the L1 budget lambda
    Exp3(ExpArgs),
    /// Error against N under heavy-tailed generalized Pareto noise
    Exp4(ExpArgs),
    /// Fit a single signal read from a CSV file
    Fit(FitArgs),
    /// Summarize a per-trial CSV
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct ExpArgs {
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// desk | full
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// constant_5 | floor_sqrt_N | floor_N_over_10 (exp1, exp4)
    #[arg(long)]
    sparsity_rule: Option<String>,
    /// iid | correlated (exp2; both when omitted)
    #[arg(long)]
    noise: Option<String>,
    /// Comma-separated grid: N (exp1, exp4), n (exp2) or lambda (exp3)
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    step_scale: Option<f64>,
    /// Record per-trial wall time (output is then no longer reproducible byte for byte)
    #[arg(long)]
    timing: bool,
    /// TOML file with defaults for any of the flags above
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Atom length
    #[arg(long)]
    n: Option<usize>,
    /// Number of atoms
    #[arg(long)]
    k: Option<usize>,
    /// L1 budget (constrained estimator)
    #[arg(long, conflicts_with_all = ["lambda_prime", "delta"])]
    lambda: Option<f64>,
    /// Penalty weight (penalized estimator)
    #[arg(long, conflicts_with = "delta")]
    lambda_prime: Option<f64>,
    /// Failure probability for the recommended penalty weight; needs --sigma
    #[arg(long)]
    delta: Option<f64>,
    /// Noise level for bound certificates
    #[arg(long)]
    sigma: Option<f64>,
    /// statement | with_atom_length: whether the recommended weight carries sqrt(n)
    #[arg(long)]
    lambda_prime_rule: Option<String>,
    /// Ground-truth clean signal
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    step_scale: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn load_file(path: &Option<PathBuf>) -> Result<FileConfig> {
    match path {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

fn experiment_config(kind: ExperimentKind, args: ExpArgs) -> Result<ExperimentConfig> {
    let file = load_file(&args.config)?;
    let profile: Profile = args
        .profile
        .or(file.profile)
        .map(|p| p.parse())
        .transpose()?
        .unwrap_or(Profile::Desk);
    let mut cfg = ExperimentConfig::new(kind, profile);
    if let Some(v) = args.trials.or(file.trials) {
        cfg.trials = v;
    }
    if let Some(v) = args.seed.or(file.seed) {
        cfg.master_seed = v;
    }
    if let Some(v) = args.out.or(file.out) {
        cfg.output_dir = v;
    }
    if let Some(v) = args.workers.or(file.workers) {
        cfg.workers = v;
    }
    if let Some(v) = args.sparsity_rule.or(file.sparsity_rule) {
        cfg.sparsity_rule = v.parse()?;
    }
    if let Some(v) = args.noise.or(file.noise) {
        let kind: NoiseKind = v.parse()?;
        cfg.noise_kinds = vec![kind];
    }
    if let Some(v) = args.grid.or(file.grid) {
        cfg.grid = v;
    }
    if let Some(v) = args.sigma.or(file.sigma) {
        cfg.sigma = v;
    }
    if let Some(v) = args.iterations.or(file.iterations) {
        cfg.iterations = v;
    }
    if let Some(v) = args.step_scale.or(file.step_scale) {
        cfg.step_scale = v;
    }
    cfg.record_timing = args.timing || file.timing.unwrap_or(false);
    Ok(cfg)
}

fn fit_options(args: FitArgs) -> Result<FitOptions> {
    let file = load_file(&args.config)?;
    let missing = |what: &str| CsdlError::Parameter(format!("fit needs --{what}"));
    let input = args.input.or(file.input).ok_or_else(|| missing("input"))?;
    let n = args.n.or(file.n).ok_or_else(|| missing("n"))?;
    let k = args.k.or(file.k).ok_or_else(|| missing("k"))?;
    let sigma = args.sigma.or(file.sigma);
    let with_atom_length = match args.lambda_prime_rule.or(file.lambda_prime_rule).as_deref() {
        None | Some("statement") => false,
        Some("with_atom_length") => true,
        Some(other) => return Err(CsdlError::Parameter(format!("unknown lambda-prime rule '{other}'"))),
    };
    let penalty = match (
        args.lambda.or(file.lambda),
        args.lambda_prime.or(file.lambda_prime),
        args.delta.or(file.delta),
    ) {
        (Some(l), None, None) => FitPenalty::Lambda(l),
        (None, Some(lp), None) => FitPenalty::LambdaPrime(lp),
        (None, None, Some(delta)) => FitPenalty::Delta {
            delta,
            sigma: sigma.ok_or_else(|| missing("sigma (required with --delta)"))?,
            with_atom_length,
        },
        _ => {
            return Err(CsdlError::Parameter(
                "fit needs exactly one of --lambda, --lambda-prime or --delta".into(),
            ))
        }
    };
    let mut opts = FitOptions::new(input, n, k, penalty);
    opts.sigma = sigma;
    opts.truth = args.truth.or(file.truth);
    if let Some(v) = args.out.or(file.out) {
        opts.output_dir = v;
    }
    if let Some(v) = args.seed.or(file.seed) {
        opts.seed = v;
    }
    if let Some(v) = args.iterations.or(file.iterations) {
        opts.iterations = v;
    }
    if let Some(v) = args.step_scale.or(file.step_scale) {
        opts.step_scale = v;
    }
    Ok(opts)
}

fn run(cli: Cli) -> Result<i32> {
    let (kind, args) = match cli.command {
        Command::Exp1(a) => (ExperimentKind::Exp1, a),
        Command::Exp2(a) => (ExperimentKind::Exp2, a),
        Command::Exp3(a) => (ExperimentKind::Exp3, a),
        Command::Exp4(a) => (ExperimentKind::Exp4, a),
        Command::Fit(a) => {
            let opts = fit_options(a)?;
            let report = run_fit(&opts)?;
            println!(
                "final objective {:.6e}, |R|_1,1 = {:.6}; outputs in {}",
                report.final_objective,
                report.encoding_l11,
                opts.output_dir.display()
            );
            if let Some(t) = report.truth {
                println!("mse csdl {:.6e}, zero {:.6e}", t.mse_csdl, t.mse_zero);
            }
            return Ok(0);
        }
        Command::Summarize(a) => {
            let rows = summarize_file(&a.input, &a.out)?;
            info!("{} grid points summarized", rows.len());
            return Ok(0);
        }
    };
    let cfg = experiment_config(kind, args)?;
    let (output, paths) = run_experiment(&cfg)?;
    for row in &output.summary {
        println!(
            "grid {:>2}  N={:<5} n={:<4} sparsity={:<4} lambda={:<8} {:<10} mse_csdl={:.4e} ± {:.1e}  mse_zero={:.4e}",
            row.grid_index,
            row.signal_length,
            row.atom_length,
            row.sparsity,
            row.lambda,
            row.noise_kind,
            row.mse_csdl.mean,
            row.mse_csdl.stderr,
            row.mse_zero.mean,
        );
    }
    println!("wrote {} and {}", paths.trials.display(), paths.summary.display());
    if output.failures.is_empty() {
        Ok(0)
    } else {
        for (grid, msg) in &output.failures {
            error!("grid point {grid} failed: {msg}");
        }
        Ok(3)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
