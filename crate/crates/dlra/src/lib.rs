//! Dynamical low-rank integration of matrix ODEs dY/dt = F(t, Y).
//!
//! The integrators evolve a factored state Y = U S V^H of fixed rank r:
//! a first-order method that augments the bases with F·V and F^H·U before a
//! Galerkin update and truncation, its arbitrary-order explicit Runge-Kutta
//! extension (one augmented basis per stage), and a projected Runge-Kutta
//! comparator that retracts dense stage updates back to rank r. Everything
//! is generic over the scalar type, so the same code runs real (f32/f64)
//! and complex trajectories.
//!
//! The crate also ships three benchmark matrix ODEs (a stiff
//! reaction-diffusion equation, a forced Lyapunov equation, and a cubic
//! Schrödinger equation), a convergence-study harness with empirical order
//! estimation, and randomized projection diagnostics. The `dlra` binary in
//! this workspace exposes all of it on the command line.

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod integrate;
pub mod lowrank;
pub mod matrix;
pub mod problems;
pub mod scalar;
pub mod tableau;

pub use error::{Error, Result};
pub use harness::{
    estimate_order, plateau_monotone, plateau_vs_rank, run_study, write_records_csv,
    ConvergenceRecord, MethodSpec, OrderEstimate, ProblemConfig, StudyConfig,
};
pub use integrate::{
    bug_euler_step, dense_rk_step, integer_steps, integrate, integrate_with, lowrank_step,
    projected_rk_step, reference_solve, rk_bug_step, rk_bug_step_traced, Method, RhsOperator,
    State, StepInfo, StepRecord,
};
pub use lowrank::{tangent_project, truncate, truncate_core, LowRankMatrix};
pub use matrix::{ortho, svd, DenseMatrix, SvdResult};
pub use problems::{
    make_allen_cahn, make_lyapunov, make_schrodinger, make_zero, ProblemKind, ProblemSpec,
};
pub use scalar::{ComplexScalar, RealScalar, Scalar};
pub use tableau::{builtin, builtin_names, ButcherTableau};

pub use num_complex::Complex64;

pub type RealMatrix = DenseMatrix<f64>;
pub type ComplexMatrix = DenseMatrix<Complex64>;
pub type RealLowRank = LowRankMatrix<f64>;
pub type ComplexLowRank = LowRankMatrix<Complex64>;
pub type RealRhs = RhsOperator<f64>;
pub type ComplexRhs = RhsOperator<Complex64>;
