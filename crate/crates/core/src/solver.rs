//! Alternating projected gradient descent for CSDL.
//!
//! Each iteration `i = 1, 2, …` uses the step `γ = step_scale / √i` and
//!
//! 1. takes a gradient step in `D`, then rescales its columns to unit norm;
//! 2. takes a gradient step in `R`, then projects it onto the feasible set:
//!    the nonnegative `L_{1,1}` ball of radius `λ` (constrained mode), or
//!    applies the nonnegative soft threshold `γ λ'` (penalized mode).
//!
//! The default schedule is 200 iterations at `step_scale = 0.01` with no
//! early stopping, restarts or line search; all three can be switched on
//! through [`SolverConfig`].

use ndarray::{Array2, ArrayView2, ShapeBuilder};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CsdlError, Result};
use crate::projections::{project_columns_to_sphere, project_nonneg_l11_ball, prox_nonneg_l1};
use crate::synthesis::{derive_seed, rng_from_seed};
use crate::tensor_ops::{
    gradient_d, gradient_r, multi_convolve, residual, squared_norm, Dictionary, EncodingMatrix,
    Signal,
};

pub const DEFAULT_ITERATIONS: usize = 200;
pub const DEFAULT_STEP_SCALE: f64 = 0.01;

/// Halvings tried per block when backtracking is enabled.
const MAX_BACKTRACKS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    /// `min ‖Y - R ⊗ D‖²` subject to `R ≥ 0`, `‖R‖_{1,1} ≤ λ`, unit-norm atoms.
    Constrained,
    /// `min ‖Y - R ⊗ D‖² + λ' ‖R‖_{1,1}` subject to `R ≥ 0`, unit-norm atoms.
    Penalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub mode: SolverMode,
    /// `L_{1,1}` budget (constrained mode only).
    pub lambda: f64,
    /// Penalty weight (penalized mode only).
    pub lambda_prime: f64,
    pub iterations: usize,
    pub step_scale: f64,
    pub seed: u64,
    /// Atom length `n`.
    pub atom_length: usize,
    /// Number of atoms `K`.
    pub atoms: usize,
    /// Stop once the relative objective change falls below this value.
    pub early_stop_tolerance: Option<f64>,
    /// Extra random initializations; the run with the lowest final objective wins.
    pub restarts: usize,
    /// Halve a block's step until its objective does not increase.
    pub backtracking: bool,
}

impl SolverConfig {
    pub fn constrained(atom_length: usize, atoms: usize, lambda: f64, seed: u64) -> Self {
        SolverConfig {
            mode: SolverMode::Constrained,
            lambda,
            lambda_prime: 0.0,
            iterations: DEFAULT_ITERATIONS,
            step_scale: DEFAULT_STEP_SCALE,
            seed,
            atom_length,
            atoms,
            early_stop_tolerance: None,
            restarts: 0,
            backtracking: false,
        }
    }

    pub fn penalized(atom_length: usize, atoms: usize, lambda_prime: f64, seed: u64) -> Self {
        SolverConfig {
            mode: SolverMode::Penalized,
            lambda: 0.0,
            lambda_prime,
            ..Self::constrained(atom_length, atoms, 0.0, seed)
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_step_scale(mut self, step_scale: f64) -> Self {
        self.step_scale = step_scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(CsdlError::Parameter("iterations must be >= 1".into()));
        }
        if !(self.step_scale > 0.0) || !self.step_scale.is_finite() {
            return Err(CsdlError::Parameter(format!(
                "step scale must be positive, got {}",
                self.step_scale
            )));
        }
        if self.atom_length == 0 || self.atoms == 0 {
            return Err(CsdlError::Parameter(format!(
                "need n >= 1 and K >= 1, got n = {}, K = {}",
                self.atom_length, self.atoms
            )));
        }
        let (name, weight) = match self.mode {
            SolverMode::Constrained => ("lambda", self.lambda),
            SolverMode::Penalized => ("lambda_prime", self.lambda_prime),
        };
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(CsdlError::Parameter(format!("{name} must be finite and >= 0, got {weight}")));
        }
        if let Some(tol) = self.early_stop_tolerance {
            if !(tol >= 0.0) {
                return Err(CsdlError::Parameter(format!("early-stop tolerance must be >= 0, got {tol}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub encoding: EncodingMatrix,
    pub dictionary: Dictionary,
    /// `X̂ = R̂ ⊗ D̂`, recomputed from the returned factors.
    pub reconstruction: Signal,
    /// Objective after each iteration. In penalized mode this includes `λ' ‖R‖_{1,1}`.
    pub objective_trace: Vec<f64>,
    /// Objective at the (feasible) initialization.
    pub initial_objective: f64,
    pub final_objective: f64,
}

/// Runs the solver selected by `cfg.mode`.
pub fn solve(y: &Signal, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_observed(y, cfg, |_, _, _| {})
}

pub fn solve_constrained(y: &Signal, cfg: &SolverConfig) -> Result<SolveResult> {
    if cfg.mode != SolverMode::Constrained {
        return Err(CsdlError::Parameter("solve_constrained needs a constrained config".into()));
    }
    solve(y, cfg)
}

pub fn solve_penalized(y: &Signal, cfg: &SolverConfig) -> Result<SolveResult> {
    if cfg.mode != SolverMode::Penalized {
        return Err(CsdlError::Parameter("solve_penalized needs a penalized config".into()));
    }
    solve(y, cfg)
}

/// Like [`solve`], but calls `observer(iteration, &R, &D)` after every
/// iteration with the projected iterates (iteration 0 is the initialization).
pub fn solve_observed<F>(y: &Signal, cfg: &SolverConfig, mut observer: F) -> Result<SolveResult>
where
    F: FnMut(usize, &EncodingMatrix, &Dictionary),
{
    cfg.validate()?;
    if y.len() < cfg.atom_length {
        return Err(CsdlError::Dimension(format!(
            "signal of length {} is shorter than the atom length {}",
            y.len(),
            cfg.atom_length
        )));
    }
    if y.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(CsdlError::Input("signal has a non-finite entry".into()));
    }

    let mut best: Option<SolveResult> = None;
    for restart in 0..=cfg.restarts {
        let seed = if restart == 0 {
            cfg.seed
        } else {
            derive_seed(&[cfg.seed, restart as u64])
        };
        let run = run_once(y, cfg, seed, &mut observer)?;
        if best
            .as_ref()
            .map_or(true, |b| run.final_objective < b.final_objective)
        {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one run"))
}

struct Problem<'a> {
    y: &'a [f64],
    cfg: &'a SolverConfig,
}

impl Problem<'_> {
    fn penalty(&self, r: &EncodingMatrix) -> f64 {
        match self.cfg.mode {
            SolverMode::Constrained => 0.0,
            SolverMode::Penalized => self.cfg.lambda_prime * r.l11_norm(),
        }
    }

    fn objective(&self, e: &[f64], r: &EncodingMatrix) -> f64 {
        squared_norm(e) + self.penalty(r)
    }

    fn residual(&self, r: &EncodingMatrix, d: &Dictionary) -> Vec<f64> {
        residual(self.y, &r.view(), &d.view())
    }

    fn feasible_encoding(&self, raw: ArrayView2<'_, f64>, step: f64) -> Result<EncodingMatrix> {
        match self.cfg.mode {
            SolverMode::Constrained => project_nonneg_l11_ball(raw, self.cfg.lambda),
            SolverMode::Penalized => prox_nonneg_l1(raw, step * self.cfg.lambda_prime),
        }
    }

    fn dictionary_step(&self, d: &Dictionary, grad: &Array2<f64>, step: f64) -> Result<Dictionary> {
        project_columns_to_sphere((d.values() - &(grad * step)).view())
    }

    fn encoding_step(&self, r: &EncodingMatrix, grad: &Array2<f64>, step: f64) -> Result<EncodingMatrix> {
        self.feasible_encoding((r.values() - &(grad * step)).view(), step)
    }
}

fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let mut a = Array2::zeros((rows, cols).f());
    a.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
    a
}

fn ensure_finite(objective: f64, iteration: usize) -> Result<()> {
    if objective.is_finite() {
        Ok(())
    } else {
        Err(CsdlError::Numerical(format!(
            "objective became non-finite at iteration {iteration}"
        )))
    }
}

fn run_once<F>(y: &Signal, cfg: &SolverConfig, seed: u64, observer: &mut F) -> Result<SolveResult>
where
    F: FnMut(usize, &EncodingMatrix, &Dictionary),
{
    let problem = Problem {
        y: y.as_slice(),
        cfg,
    };
    let rows = y.len() - cfg.atom_length + 1;
    let mut rng = rng_from_seed(seed);

    let mut d = project_columns_to_sphere(gaussian_matrix(cfg.atom_length, cfg.atoms, &mut rng).view())?;
    let mut r = match cfg.mode {
        SolverMode::Constrained => {
            project_nonneg_l11_ball(gaussian_matrix(rows, cfg.atoms, &mut rng).view(), cfg.lambda)?
        }
        SolverMode::Penalized => prox_nonneg_l1(gaussian_matrix(rows, cfg.atoms, &mut rng).view(), 0.0)?,
    };
    observer(0, &r, &d);

    let mut e = problem.residual(&r, &d);
    let initial_objective = problem.objective(&e, &r);
    ensure_finite(initial_objective, 0)?;
    let mut current = initial_objective;
    let mut trace = Vec::with_capacity(cfg.iterations);

    for i in 1..=cfg.iterations {
        let step = cfg.step_scale / (i as f64).sqrt();

        let grad_d = gradient_d(&e, &r.view(), cfg.atom_length);
        let mut d_step = step;
        let mut next_d = problem.dictionary_step(&d, &grad_d, d_step)?;
        e = problem.residual(&r, &next_d);
        if cfg.backtracking {
            let mut tries = 0;
            while problem.objective(&e, &r) > current && tries < MAX_BACKTRACKS {
                d_step *= 0.5;
                next_d = problem.dictionary_step(&d, &grad_d, d_step)?;
                e = problem.residual(&r, &next_d);
                tries += 1;
            }
            current = problem.objective(&e, &r);
        }
        d = next_d;

        let grad_r = gradient_r(&e, rows, &d.view());
        let mut r_step = step;
        let mut next_r = problem.encoding_step(&r, &grad_r, r_step)?;
        e = problem.residual(&next_r, &d);
        if cfg.backtracking {
            let mut tries = 0;
            while problem.objective(&e, &next_r) > current && tries < MAX_BACKTRACKS {
                r_step *= 0.5;
                next_r = problem.encoding_step(&r, &grad_r, r_step)?;
                e = problem.residual(&next_r, &d);
                tries += 1;
            }
        }
        r = next_r;

        let objective = problem.objective(&e, &r);
        ensure_finite(objective, i)?;
        observer(i, &r, &d);
        trace.push(objective);

        let previous = current;
        current = objective;
        if let Some(tol) = cfg.early_stop_tolerance {
            if (previous - objective).abs() <= tol * previous.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }

    let reconstruction = multi_convolve(r.view(), d.view())?;
    let final_objective = *trace.last().expect("iterations >= 1");
    Ok(SolveResult {
        encoding: r,
        dictionary: d,
        reconstruction,
        objective_trace: trace,
        initial_objective,
        final_objective,
    })
}
