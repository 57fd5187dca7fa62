//! Fitting a single user-supplied signal.
//!
//! Input: a CSV with one real per line, optionally preceded by a `value`
//! header. Outputs written to the output directory:
//!
//! * `reconstruction.csv`: `X̂` as a `value` column;
//! * `encoding.csv`: nonzero entries of `R̂` as `row,col,value` triplets;
//! * `dictionary.csv`: `D̂` densely, one column per atom;
//! * `report.toml`: objective, `‖R̂‖_{1,1}`, bound certificates (when `σ` is
//!   known) and errors against an optional ground-truth signal.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bounds::{recommended_lambda_prime, ub_penalized, BoundInputs, BoundSet};
use crate::error::{CsdlError, Result};
use crate::harness::format::format_g12;
use crate::harness::records::parse_err;
use crate::solver::{solve, SolveResult, SolverConfig, SolverMode, DEFAULT_ITERATIONS, DEFAULT_STEP_SCALE};
use crate::tensor_ops::Signal;

/// Which estimator `fit` runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitPenalty {
    /// Constrained estimator with budget `λ`.
    Lambda(f64),
    /// Penalized estimator with weight `λ'`.
    LambdaPrime(f64),
    /// Penalized estimator with `λ' = σ √(2 log(2N/δ))`, times `√n` when
    /// `with_atom_length` is set.
    Delta {
        delta: f64,
        sigma: f64,
        with_atom_length: bool,
    },
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub input: PathBuf,
    pub atom_length: usize,
    pub atoms: usize,
    pub penalty: FitPenalty,
    /// Noise level used for bound certificates.
    pub sigma: Option<f64>,
    pub truth: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub iterations: usize,
    pub step_scale: f64,
}

impl FitOptions {
    pub fn new(input: impl Into<PathBuf>, atom_length: usize, atoms: usize, penalty: FitPenalty) -> Self {
        FitOptions {
            input: input.into(),
            atom_length,
            atoms,
            penalty,
            sigma: None,
            truth: None,
            output_dir: PathBuf::from("fit_output"),
            seed: 0,
            iterations: DEFAULT_ITERATIONS,
            step_scale: DEFAULT_STEP_SCALE,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Certificates {
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ub_componentwise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ub_joint: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lb_componentwise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lb_joint: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ub_penalized: Option<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TruthComparison {
    pub mse_csdl: f64,
    pub mse_zero: f64,
    pub mse_identity: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FitReport {
    pub mode: String,
    pub signal_length: usize,
    pub atom_length: usize,
    pub atoms: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_prime: Option<f64>,
    pub iterations: usize,
    pub seed: u64,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub encoding_l11: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificates: Option<Certificates>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthComparison>,
}

/// Reads one real per line. A leading `value` header and blank lines are allowed.
pub fn read_signal_csv(path: &Path) -> Result<Signal> {
    let text = fs::read_to_string(path).map_err(|e| CsdlError::io(path, e))?;
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || (i == 0 && line.eq_ignore_ascii_case("value")) {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|e| parse_err(path, i + 1, format!("'{line}' is not a number: {e}")))?;
        if !v.is_finite() {
            return Err(parse_err(path, i + 1, format!("'{line}' is not finite")));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(parse_err(path, 1, "no values found"));
    }
    Signal::from_vec(values)
}

fn write_text(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| CsdlError::io(path, e))
}

pub fn write_signal_csv(path: &Path, signal: &Signal) -> Result<()> {
    let mut text = String::from("value\n");
    for v in signal.as_slice() {
        text.push_str(&format_g12(*v));
        text.push('\n');
    }
    write_text(path, text)
}

fn write_factors(dir: &Path, fit: &SolveResult) -> Result<()> {
    write_signal_csv(&dir.join("reconstruction.csv"), &fit.reconstruction)?;

    let mut enc = String::from("row,col,value\n");
    for (i, k, v) in fit.encoding.triplets() {
        enc.push_str(&format!("{i},{k},{}\n", format_g12(v)));
    }
    write_text(&dir.join("encoding.csv"), enc)?;

    let d = fit.dictionary.values();
    let header: Vec<String> = (0..d.ncols()).map(|k| format!("atom_{k}")).collect();
    let mut dict = header.join(",");
    dict.push('\n');
    for row in d.rows() {
        let cells: Vec<String> = row.iter().map(|v| format_g12(*v)).collect();
        dict.push_str(&cells.join(","));
        dict.push('\n');
    }
    write_text(&dir.join("dictionary.csv"), dict)
}

/// Fits the input signal, writes the factors and report, and returns the report.
pub fn run_fit(opts: &FitOptions) -> Result<FitReport> {
    let y = read_signal_csv(&opts.input)?;
    let len = y.len();
    let (mut cfg, sigma) = match opts.penalty {
        FitPenalty::Lambda(lambda) => (SolverConfig::constrained(opts.atom_length, opts.atoms, lambda, opts.seed), opts.sigma),
        FitPenalty::LambdaPrime(lp) => (SolverConfig::penalized(opts.atom_length, opts.atoms, lp, opts.seed), opts.sigma),
        FitPenalty::Delta {
            delta,
            sigma,
            with_atom_length,
        } => {
            let mut lp = recommended_lambda_prime(sigma, len, delta)?;
            if with_atom_length {
                lp *= (opts.atom_length as f64).sqrt();
            }
            (SolverConfig::penalized(opts.atom_length, opts.atoms, lp, opts.seed), Some(sigma))
        }
    };
    cfg.iterations = opts.iterations;
    cfg.step_scale = opts.step_scale;
    let fit = solve(&y, &cfg)?;

    let truth = match &opts.truth {
        Some(path) => {
            let x = read_signal_csv(path)?;
            if x.len() != len {
                return Err(CsdlError::Dimension(format!(
                    "ground truth has length {} but the input has {len}",
                    x.len()
                )));
            }
            Some(TruthComparison {
                mse_csdl: fit.reconstruction.squared_distance(&x)? / len as f64,
                mse_zero: x.squared_norm() / len as f64,
                mse_identity: y.squared_distance(&x)? / len as f64,
            })
        }
        None => None,
    };

    let certificates = match sigma {
        Some(sigma) => {
            let delta = match opts.penalty {
                FitPenalty::Delta { delta, .. } => delta,
                _ => 0.05,
            };
            Some(match cfg.mode {
                SolverMode::Constrained => {
                    let b = BoundSet::evaluate(&BoundInputs::new(len, opts.atom_length, cfg.lambda, sigma));
                    Certificates {
                        sigma,
                        ub_componentwise: Some(b.ub_componentwise),
                        ub_joint: Some(b.ub_joint),
                        lb_componentwise: Some(b.lb_componentwise),
                        lb_joint: Some(b.lb_joint),
                        ub_penalized: None,
                    }
                }
                SolverMode::Penalized => {
                    let inputs = BoundInputs::new(len, opts.atom_length, 0.0, sigma).with_delta(delta);
                    Certificates {
                        sigma,
                        ub_componentwise: None,
                        ub_joint: None,
                        lb_componentwise: None,
                        lb_joint: None,
                        ub_penalized: Some(ub_penalized(&inputs, cfg.lambda_prime)?),
                    }
                }
            })
        }
        None => None,
    };

    let report = FitReport {
        mode: match cfg.mode {
            SolverMode::Constrained => "constrained".into(),
            SolverMode::Penalized => "penalized".into(),
        },
        signal_length: len,
        atom_length: opts.atom_length,
        atoms: opts.atoms,
        lambda: (cfg.mode == SolverMode::Constrained).then_some(cfg.lambda),
        lambda_prime: (cfg.mode == SolverMode::Penalized).then_some(cfg.lambda_prime),
        iterations: fit.objective_trace.len(),
        seed: opts.seed,
        initial_objective: fit.initial_objective,
        final_objective: fit.final_objective,
        encoding_l11: fit.encoding.l11_norm(),
        certificates,
        truth,
    };

    fs::create_dir_all(&opts.output_dir).map_err(|e| CsdlError::io(&opts.output_dir, e))?;
    write_factors(&opts.output_dir, &fit)?;
    let toml = toml::to_string(&report)
        .map_err(|e| CsdlError::Numerical(format!("cannot serialize report: {e}")))?;
    write_text(&opts.output_dir.join("report.toml"), toml)?;
    Ok(report)
}
