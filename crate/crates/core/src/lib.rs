//! Convolutional sparse dictionary learning (CSDL).
//!
//! A long signal `Y` of length `N` is modelled as `Y = R ⊗ D + ε`, where the
//! dictionary `D` holds `K` unit-norm atoms of length `n`, the nonnegative
//! encoding `R` (of shape `(N - n + 1) × K`) places scaled copies of the atoms
//! along the signal, and `⊗` sums the full convolutions of matching columns.
//!
//! The crate provides
//!
//! * [`tensor_ops`]: multi-convolution, its adjoint, `L_{p,q}` norms and the
//!   least-squares objective with its gradients;
//! * [`projections`]: the exact Euclidean projections and proximal step used
//!   by the solver;
//! * [`solver`]: alternating projected gradient descent for the
//!   `L_{1,1}`-constrained estimator and a proximal variant for the penalized one;
//! * [`synthesis`]: seeded planted instances and noise models;
//! * [`bounds`]: closed-form minimax upper and lower risk bounds;
//! * [`harness`]: the experiment runner behind the `csdl` binary.

pub mod bounds;
pub mod error;
pub mod harness;
pub mod projections;
pub mod solver;
pub mod synthesis;
pub mod tensor_ops;

pub use error::{CsdlError, Result};
pub use solver::{solve, solve_constrained, solve_penalized, SolveResult, SolverConfig, SolverMode};
pub use synthesis::{plant_instance, NoiseKind, NoiseModel, PlantedInstance};
pub use tensor_ops::{Dictionary, EncodingMatrix, Signal};
