//! Solvers for the self-dual Chern–Simons type equation
//!
//! ```text
//! Δu = λ e^u (e^u − 1)^5 + 4π Σ_s n_s δ_{p_s}
//! ```
//!
//! on a connected finite weighted graph: monotone iteration to the maximal
//! solution, energy descent, a numerical mountain pass for a second solution,
//! and bisection bracketing of the critical coupling below which no solution
//! exists.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chern_simons;
pub mod critical;
pub mod error;
pub mod field;
pub mod graph;
pub mod linear;
pub mod spectral;
pub mod variational;

pub use error::{Error, Result};
pub use field::VertexField;
pub use graph::{generate_graph, GraphJson, GraphKind, GraphOptions, WeightedGraph};
pub use linear::{solve_poisson_mean_zero, solve_shifted, LinearSolveConfig, ShiftedSolver, SolveMethod};
pub use spectral::{poincare_constant, spectral_gap};
pub use chern_simons::{
    compare_lambda_monotonicity, compute_u0, is_subsolution, monotone_iterate, nonlinearity, nonlinearity_prime,
    residual_reduced, verify_solution, LambdaComparison, SchemeConfig, SolveReport, SolveStatus, Verification,
    Vortex, VortexProblem,
};
pub use variational::{
    energy, energy_gradient, minimize, mountain_pass, DescentConfig, Minimum, MountainPassConfig, MountainPassReport,
};
pub use critical::{find_critical_lambda, sweep_lambda, CriticalEstimate, SweepOptions, SweepRow};
