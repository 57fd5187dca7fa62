//! The four synthetic experiments.
//!
//! * `exp1`: error against signal length `N`, sparsity scaling by rule, iid noise.
//! * `exp2`: error against atom length `n` under iid and perfectly correlated noise.
//! * `exp3`: error against the budget `λ` at fixed `N`.
//! * `exp4`: `exp1` with symmetric generalized Pareto noise.
//!
//! Every trial plants a fresh instance from its own seed
//! `hash(master_seed, grid_index, trial_index)`, so results are independent
//! of worker count and scheduling.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{trivial_estimator_risks, BoundInputs, BoundSet};
use crate::error::{CsdlError, Result};
use crate::harness::records::{write_trials, CsvMeta, TrialRecord};
use crate::harness::summary::{summarize_records, write_summary, SummaryRow};
use crate::solver::{solve, SolverConfig, DEFAULT_ITERATIONS, DEFAULT_STEP_SCALE};
use crate::synthesis::{derive_seed, plant_instance, trial_seed, NoiseKind, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::Exp1 => "exp1",
            ExperimentKind::Exp2 => "exp2",
            ExperimentKind::Exp3 => "exp3",
            ExperimentKind::Exp4 => "exp4",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ExperimentKind {
    type Err = CsdlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp1" => Ok(ExperimentKind::Exp1),
            "exp2" => Ok(ExperimentKind::Exp2),
            "exp3" => Ok(ExperimentKind::Exp3),
            "exp4" => Ok(ExperimentKind::Exp4),
            other => Err(CsdlError::Parameter(format!("unknown experiment '{other}'"))),
        }
    }
}

/// How the true `‖R‖_{1,1}` scales with `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityRule {
    Constant5,
    FloorSqrtN,
    FloorNOver10,
}

impl SparsityRule {
    pub fn apply(self, signal_length: usize) -> u64 {
        match self {
            SparsityRule::Constant5 => 5,
            SparsityRule::FloorSqrtN => integer_sqrt(signal_length as u64),
            SparsityRule::FloorNOver10 => signal_length as u64 / 10,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SparsityRule::Constant5 => "constant_5",
            SparsityRule::FloorSqrtN => "floor_sqrt_N",
            SparsityRule::FloorNOver10 => "floor_N_over_10",
        }
    }
}

impl FromStr for SparsityRule {
    type Err = CsdlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant_5" | "constant" => Ok(SparsityRule::Constant5),
            "floor_sqrt_N" | "floor_sqrt_n" | "sqrt" => Ok(SparsityRule::FloorSqrtN),
            "floor_N_over_10" | "floor_n_over_10" | "linear" => Ok(SparsityRule::FloorNOver10),
            other => Err(CsdlError::Parameter(format!("unknown sparsity rule '{other}'"))),
        }
    }
}

fn integer_sqrt(v: u64) -> u64 {
    let mut r = (v as f64).sqrt() as u64;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    r
}

/// Desk profile is sized for a laptop; full mirrors the published setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Full,
}

impl FromStr for Profile {
    type Err = CsdlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(CsdlError::Parameter(format!("unknown profile '{other}'"))),
        }
    }
}

impl Profile {
    pub fn label(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::Full => "full",
        }
    }
}

/// `count` points spaced evenly in log10 between `10^lo` and `10^hi`.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![10f64.powf(lo)],
        _ => (0..count)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (count - 1) as f64))
            .collect(),
    }
}

fn rounded_grid(values: Vec<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = values.into_iter().map(f64::round).collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub profile: Profile,
    pub trials: u64,
    pub master_seed: u64,
    /// `N` values (exp1, exp4), `n` values (exp2) or `λ` values (exp3).
    pub grid: Vec<f64>,
    pub signal_length: usize,
    pub sparsity: u64,
    pub atom_length: usize,
    pub atoms: usize,
    pub sigma: f64,
    /// Sparsity scaling for exp1 and exp4 (exp3 always uses `⌊√N⌋`).
    pub sparsity_rule: SparsityRule,
    /// Noise kinds swept by exp2.
    pub noise_kinds: Vec<NoiseKind>,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub record_timing: bool,
    pub iterations: usize,
    pub step_scale: f64,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, profile: Profile) -> Self {
        let full = profile == Profile::Full;
        let grid = match (experiment, full) {
            (ExperimentKind::Exp1 | ExperimentKind::Exp4, false) => vec![100.0, 316.0, 1000.0, 3162.0],
            (ExperimentKind::Exp1 | ExperimentKind::Exp4, true) => rounded_grid(log_space(2.0, 4.0, 9)),
            (ExperimentKind::Exp2, false) => vec![10.0, 32.0, 100.0, 316.0],
            (ExperimentKind::Exp2, true) => rounded_grid(log_space(0.5, 3.0, 11)),
            // Multiples of ⌊√1000⌋ = 31 around the true sparsity.
            (ExperimentKind::Exp3, false) => vec![0.1, 1.0, 31.0, 310.0, 3100.0],
            (ExperimentKind::Exp3, true) => log_space(-2.0, 4.0, 13),
        };
        let signal_length = match (experiment, full) {
            (ExperimentKind::Exp2, false) => 2000,
            (ExperimentKind::Exp2, true) => 5000,
            _ => 1000,
        };
        ExperimentConfig {
            experiment,
            profile,
            trials: if full { 1000 } else { 50 },
            master_seed: 0,
            grid,
            signal_length,
            sparsity: 100,
            atom_length: 10,
            atoms: 5,
            sigma: 0.1,
            sparsity_rule: SparsityRule::FloorSqrtN,
            noise_kinds: vec![NoiseKind::Iid, NoiseKind::Correlated],
            workers: 1,
            output_dir: PathBuf::from("results"),
            record_timing: false,
            iterations: DEFAULT_ITERATIONS,
            step_scale: DEFAULT_STEP_SCALE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(CsdlError::Parameter("trials must be >= 1".into()));
        }
        if self.grid.is_empty() {
            return Err(CsdlError::Parameter("grid must not be empty".into()));
        }
        if self.grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(CsdlError::Parameter("grid values must be finite and >= 0".into()));
        }
        if self.workers == 0 {
            return Err(CsdlError::Parameter("workers must be >= 1".into()));
        }
        if !(self.sigma >= 0.0) {
            return Err(CsdlError::Parameter(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if self.experiment == ExperimentKind::Exp2 && self.noise_kinds.is_empty() {
            return Err(CsdlError::Parameter("exp2 needs at least one noise kind".into()));
        }
        if self.experiment == ExperimentKind::Exp2 && self.noise_kinds.contains(&NoiseKind::GeneralizedPareto) {
            return Err(CsdlError::Parameter("exp2 compares Gaussian noise kinds only".into()));
        }
        Ok(())
    }

    /// Sparsity rule actually used, recorded in CSV metadata.
    pub fn effective_sparsity_rule(&self) -> Option<SparsityRule> {
        match self.experiment {
            ExperimentKind::Exp1 | ExperimentKind::Exp4 => Some(self.sparsity_rule),
            ExperimentKind::Exp3 => Some(SparsityRule::FloorSqrtN),
            ExperimentKind::Exp2 => None,
        }
    }

    pub fn meta(&self) -> CsvMeta {
        let mut m = CsvMeta::default();
        m.insert("experiment", self.experiment.label());
        m.insert("profile", self.profile.label());
        m.insert("master_seed", self.master_seed.to_string());
        m.insert("trials", self.trials.to_string());
        match self.effective_sparsity_rule() {
            Some(rule) => m.insert("sparsity_rule", rule.label()),
            None => m.insert("sparsity", self.sparsity.to_string()),
        }
        m.insert("sigma", super::format::format_g12(self.sigma));
        m.insert("iterations", self.iterations.to_string());
        m.insert("step_scale", super::format::format_g12(self.step_scale));
        m
    }

    fn grid_usize(&self, v: f64, what: &str) -> Result<usize> {
        if v < 1.0 || v.fract() != 0.0 {
            return Err(CsdlError::Parameter(format!("{what} grid value {v} is not a positive integer")));
        }
        Ok(v as usize)
    }
}

/// How the solver's `L_{1,1}` budget is chosen at a grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    /// The planted instance's realized `‖R‖_{1,1}`.
    Realized,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub signal_length: usize,
    pub atom_length: usize,
    pub atoms: usize,
    pub sparsity: u64,
    pub lambda: LambdaChoice,
    pub noise: NoiseModel,
}

pub fn grid_points(cfg: &ExperimentConfig) -> Result<Vec<GridPoint>> {
    cfg.validate()?;
    let mut points = Vec::new();
    let mut push = |signal_length: usize, atom_length: usize, sparsity: u64, lambda, noise| {
        let index = points.len();
        points.push(GridPoint {
            index,
            signal_length,
            atom_length,
            atoms: cfg.atoms,
            sparsity,
            lambda,
            noise,
        });
    };
    match cfg.experiment {
        ExperimentKind::Exp1 | ExperimentKind::Exp4 => {
            let noise = if cfg.experiment == ExperimentKind::Exp1 {
                NoiseModel::iid(cfg.sigma)
            } else {
                NoiseModel::heavy_tailed()
            };
            for &v in &cfg.grid {
                let n_len = cfg.grid_usize(v, "N")?;
                push(n_len, cfg.atom_length, cfg.sparsity_rule.apply(n_len), LambdaChoice::Realized, noise);
            }
        }
        ExperimentKind::Exp2 => {
            for &kind in &cfg.noise_kinds {
                for &v in &cfg.grid {
                    let atom_length = cfg.grid_usize(v, "n")?;
                    push(
                        cfg.signal_length,
                        atom_length,
                        cfg.sparsity,
                        LambdaChoice::Realized,
                        NoiseModel::gaussian(kind, cfg.sigma)?,
                    );
                }
            }
        }
        ExperimentKind::Exp3 => {
            let sparsity = SparsityRule::FloorSqrtN.apply(cfg.signal_length);
            for &lambda in &cfg.grid {
                push(
                    cfg.signal_length,
                    cfg.atom_length,
                    sparsity,
                    LambdaChoice::Fixed(lambda),
                    NoiseModel::iid(cfg.sigma),
                );
            }
        }
    }
    for p in &points {
        if p.atom_length > p.signal_length {
            return Err(CsdlError::Parameter(format!(
                "grid point {}: atom length {} exceeds N = {}",
                p.index, p.atom_length, p.signal_length
            )));
        }
    }
    Ok(points)
}

fn run_trial(cfg: &ExperimentConfig, point: &GridPoint, trial: u64) -> Result<TrialRecord> {
    let start = Instant::now();
    let seed = trial_seed(cfg.master_seed, point.index as u64, trial);
    let instance = plant_instance(
        point.signal_length,
        point.atom_length,
        point.atoms,
        point.sparsity,
        point.noise,
        seed,
    )?;
    let lambda = match point.lambda {
        LambdaChoice::Realized => instance.sparsity(),
        LambdaChoice::Fixed(v) => v,
    };
    let solver_cfg = SolverConfig::constrained(point.atom_length, point.atoms, lambda, derive_seed(&[seed, 1]))
        .with_iterations(cfg.iterations)
        .with_step_scale(cfg.step_scale);
    let fit = solve(&instance.observed, &solver_cfg)?;
    let len = point.signal_length as f64;
    let trivial = trivial_estimator_risks(&instance);
    let heavy_tailed = point.noise.kind() == NoiseKind::GeneralizedPareto;
    let bounds = point
        .noise
        .sigma()
        .map(|sigma| BoundSet::evaluate(&BoundInputs::new(point.signal_length, point.atom_length, lambda, sigma)));
    Ok(TrialRecord {
        experiment: cfg.experiment,
        grid_index: point.index,
        signal_length: point.signal_length,
        atom_length: point.atom_length,
        atoms: point.atoms,
        sparsity: point.sparsity,
        lambda,
        noise_kind: point.noise.kind(),
        trial,
        seed,
        mse_csdl: fit.reconstruction.squared_distance(&instance.clean)? / len,
        mse_zero: trivial.risk_zero,
        mse_identity: (!heavy_tailed).then_some(trivial.risk_identity),
        final_objective: fit.final_objective,
        bounds,
        wall_time_s: cfg.record_timing.then(|| start.elapsed().as_secs_f64()),
    })
}

fn failure_record(cfg: &ExperimentConfig, point: &GridPoint, trial: u64) -> TrialRecord {
    TrialRecord {
        experiment: cfg.experiment,
        grid_index: point.index,
        signal_length: point.signal_length,
        atom_length: point.atom_length,
        atoms: point.atoms,
        sparsity: point.sparsity,
        lambda: match point.lambda {
            LambdaChoice::Realized => point.sparsity as f64,
            LambdaChoice::Fixed(v) => v,
        },
        noise_kind: point.noise.kind(),
        trial,
        seed: trial_seed(cfg.master_seed, point.index as u64, trial),
        mse_csdl: f64::NAN,
        mse_zero: f64::NAN,
        mse_identity: None,
        final_objective: f64::NAN,
        bounds: None,
        wall_time_s: None,
    }
}

/// Per-trial records of a run, in `(grid_index, trial)` order.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    /// Grid points whose trials failed, with the first error message.
    pub failures: Vec<(usize, String)>,
}

/// Runs every trial of every grid point in memory.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let points = grid_points(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CsdlError::Parameter(format!("cannot build worker pool: {e}")))?;

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for point in &points {
        info!(
            "{} grid point {}: N = {}, n = {}, sparsity = {}, noise = {}",
            cfg.experiment,
            point.index,
            point.signal_length,
            point.atom_length,
            point.sparsity,
            point.noise.kind()
        );
        let outcomes: Vec<Result<TrialRecord>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(cfg, point, t))
                .collect()
        });
        match outcomes.iter().position(|o| o.is_err()) {
            None => records.extend(outcomes.into_iter().map(|o| o.expect("checked"))),
            Some(t) => {
                let message = match &outcomes[t] {
                    Err(e) => e.to_string(),
                    Ok(_) => unreachable!(),
                };
                warn!("grid point {} aborted at trial {t}: {message}", point.index);
                records.push(failure_record(cfg, point, t as u64));
                failures.push((point.index, message));
            }
        }
    }
    records.sort_by_key(|r| (r.grid_index, r.trial));
    let summary = summarize_records(&records);
    Ok(RunOutput {
        records,
        summary,
        failures,
    })
}

/// Paths written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub trials: PathBuf,
    pub summary: PathBuf,
}

pub fn output_paths(dir: &Path, experiment: ExperimentKind) -> RunPaths {
    RunPaths {
        trials: dir.join(format!("{}_trials.csv", experiment.label())),
        summary: dir.join(format!("{}_summary.csv", experiment.label())),
    }
}

/// Runs the experiment and writes `<exp>_trials.csv` and `<exp>_summary.csv`
/// under `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(RunOutput, RunPaths)> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| CsdlError::io(&cfg.output_dir, e))?;
    let output = execute(cfg)?;
    let paths = output_paths(&cfg.output_dir, cfg.experiment);
    let meta = cfg.meta();
    write_trials(&paths.trials, &meta, &output.records)?;
    write_summary(&paths.summary, &meta, &output.summary)?;
    Ok((output, paths))
}
