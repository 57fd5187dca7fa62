//! Closed-form minimax risk bounds for reconstruction of `X = R ⊗ D`,
//! measured as the average squared error `‖X̂ - X‖₂² / N`.
//!
//! All logarithms are natural.

use crate::error::{CsdlError, Result};
use crate::solver::SolveResult;
use crate::synthesis::PlantedInstance;
use crate::tensor_ops::multi_convolve;

/// Problem quantities the bounds are evaluated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    /// Signal length `N`.
    pub signal_length: usize,
    /// Atom length `n`.
    pub atom_length: usize,
    /// `L_{1,1}` budget `λ` (or the true `‖R‖_{1,1}`).
    pub lambda: f64,
    /// Sub-Gaussian constant `σ`.
    pub sigma: f64,
    /// Dictionary size; none of the formulas depend on it.
    pub atoms: usize,
    /// Moment bound `μ_p` (finite-moment bound only).
    pub mu_p: f64,
    /// Moment order `p ∈ [1, ∞]` (finite-moment bound only).
    pub p: f64,
    /// Failure probability (penalized bound only).
    pub delta: f64,
}

impl BoundInputs {
    pub fn new(signal_length: usize, atom_length: usize, lambda: f64, sigma: f64) -> Self {
        BoundInputs {
            signal_length,
            atom_length,
            lambda,
            sigma,
            atoms: 1,
            mu_p: 0.0,
            p: 2.0,
            delta: 0.05,
        }
    }

    pub fn with_atoms(mut self, atoms: usize) -> Self {
        self.atoms = atoms;
        self
    }

    pub fn with_moment(mut self, mu_p: f64, p: f64) -> Self {
        self.mu_p = mu_p;
        self.p = p;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.atom_length == 0 || self.signal_length < self.atom_length {
            return Err(CsdlError::Parameter(format!(
                "need 1 <= n <= N, got n = {}, N = {}",
                self.atom_length, self.signal_length
            )));
        }
        for (name, v) in [("lambda", self.lambda), ("sigma", self.sigma), ("mu_p", self.mu_p)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(CsdlError::Parameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.p >= 1.0) {
            return Err(CsdlError::Parameter(format!("moment order must be >= 1, got {}", self.p)));
        }
        check_delta(self.delta)
    }

    fn n(&self) -> f64 {
        self.atom_length as f64
    }

    fn big_n(&self) -> f64 {
        self.signal_length as f64
    }

    /// Number of atom positions, `N - n + 1`.
    fn positions(&self) -> f64 {
        (self.signal_length - self.atom_length + 1) as f64
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(CsdlError::Parameter(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Upper bound under componentwise sub-Gaussian noise (arbitrary dependence):
/// `4 λ σ √(2 n log(2N)) / N`.
pub fn ub_componentwise(b: &BoundInputs) -> f64 {
    4.0 * b.lambda * b.sigma * (2.0 * b.n() * (2.0 * b.big_n()).ln()).sqrt() / b.big_n()
}

/// Upper bound under jointly sub-Gaussian noise: `4 λ σ √(2 log(2(N - n + 1))) / N`.
pub fn ub_joint(b: &BoundInputs) -> f64 {
    4.0 * b.lambda * b.sigma * (2.0 * (2.0 * b.positions()).ln()).sqrt() / b.big_n()
}

/// Minimax lower bound for componentwise sub-Gaussian noise:
/// `λ / (8N) · min(λ, σ √(n log(N - n + 1)))`.
pub fn lb_componentwise(b: &BoundInputs) -> f64 {
    let noise_term = b.sigma * (b.n() * b.positions().ln()).sqrt();
    b.lambda / (8.0 * b.big_n()) * b.lambda.min(noise_term)
}

/// Minimax lower bound for `N(0, σ² I)` noise: `λ / (8N) · min(λ, σ √log(N - n + 1))`.
pub fn lb_joint(b: &BoundInputs) -> f64 {
    let noise_term = b.sigma * b.positions().ln().sqrt();
    b.lambda / (8.0 * b.big_n()) * b.lambda.min(noise_term)
}

/// Upper bound when each noise coordinate only has a finite `p`-th moment `μ_p`:
/// `4 λ μ_p N^{(1-p)/p} n^{max(0, (p-2)/(2p))}`. `p = ∞` is allowed.
pub fn ub_moment(b: &BoundInputs) -> Result<f64> {
    if !(b.p >= 1.0) {
        return Err(CsdlError::Parameter(format!("moment order must be >= 1, got {}", b.p)));
    }
    let (n_exp, big_n_exp) = if b.p.is_infinite() {
        (0.5, -1.0)
    } else {
        (((b.p - 2.0) / (2.0 * b.p)).max(0.0), (1.0 - b.p) / b.p)
    };
    Ok(4.0 * b.lambda * b.mu_p * b.big_n().powf(big_n_exp) * b.n().powf(n_exp))
}

/// Penalty weight `σ √(2 log(2N/δ))` for the penalized estimator.
pub fn recommended_lambda_prime(sigma: f64, signal_length: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(sigma >= 0.0) || signal_length == 0 {
        return Err(CsdlError::Parameter(format!(
            "need sigma >= 0 and N >= 1, got sigma = {sigma}, N = {signal_length}"
        )));
    }
    Ok(sigma * (2.0 * (2.0 * signal_length as f64 / delta).ln()).sqrt())
}

/// Variant carrying the extra `√n` used in the argument behind the penalized bound:
/// `σ √(2 n log(2N/δ))`.
pub fn recommended_lambda_prime_with_atom_length(
    sigma: f64,
    signal_length: usize,
    atom_length: usize,
    delta: f64,
) -> Result<f64> {
    Ok(recommended_lambda_prime(sigma, signal_length, delta)? * (atom_length as f64).sqrt())
}

/// High-probability bound for the penalized estimator with weight `lambda_prime`:
/// `4 λ' σ √(2 n log(2N/δ)) / N`.
pub fn ub_penalized(b: &BoundInputs, lambda_prime: f64) -> Result<f64> {
    check_delta(b.delta)?;
    Ok(4.0 * lambda_prime * b.sigma * (2.0 * b.n() * (2.0 * b.big_n() / b.delta).ln()).sqrt()
        / b.big_n())
}

/// Upper bound for patch-based (IID) sparse dictionary learning with `N'`
/// samples of dimension `d'`: `4 λ' σ √(2 d' log(2 N' d')) / (N' d')`.
pub fn ub_iid_sdl(samples: usize, dimension: usize, lambda_prime: f64, sigma: f64) -> f64 {
    let (np, dp) = (samples as f64, dimension as f64);
    4.0 * lambda_prime * sigma * (2.0 * dp * (2.0 * np * dp).ln()).sqrt() / (np * dp)
}

/// The four sub-Gaussian bounds evaluated together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSet {
    pub ub_componentwise: f64,
    pub ub_joint: f64,
    pub lb_componentwise: f64,
    pub lb_joint: f64,
}

impl BoundSet {
    pub fn evaluate(b: &BoundInputs) -> Self {
        BoundSet {
            ub_componentwise: ub_componentwise(b),
            ub_joint: ub_joint(b),
            lb_componentwise: lb_componentwise(b),
            lb_joint: lb_joint(b),
        }
    }
}

/// Average squared errors of the estimators `X̂ = 0` and `X̂ = Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrivialRisks {
    pub risk_zero: f64,
    pub risk_identity: f64,
}

pub fn trivial_estimator_risks(instance: &PlantedInstance) -> TrivialRisks {
    let len = instance.signal_length() as f64;
    TrivialRisks {
        risk_zero: instance.clean.squared_norm() / len,
        risk_identity: instance.noise.squared_norm() / len,
    }
}

/// `‖R‖_{1,1}² / N`, the worst-case risk of the zero estimator.
pub fn zero_estimator_bound(sparsity: f64, signal_length: usize) -> f64 {
    sparsity * sparsity / signal_length as f64
}

/// Gap in the basic oracle inequality at a computed estimate:
/// `‖X - X̂‖² - 2⟨ε, X̂ - X⟩`, which equals `‖Y - X̂‖² - ‖Y - X‖²`.
///
/// It is `≤ 0` whenever the estimate is a global minimizer over a feasible set
/// containing the truth; a positive value measures how far the iterate is from one.
pub fn oracle_slack(instance: &PlantedInstance, fit: &SolveResult) -> Result<f64> {
    let truth = multi_convolve(instance.encoding.view(), instance.dictionary.view())?;
    let err = truth.squared_distance(&fit.reconstruction)?;
    let cross: f64 = instance
        .noise
        .as_slice()
        .iter()
        .zip(fit.reconstruction.as_slice().iter().zip(truth.as_slice()))
        .map(|(e, (xh, x))| e * (xh - x))
        .sum();
    Ok(err - 2.0 * cross)
}
