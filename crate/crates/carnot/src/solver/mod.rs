//! Finite-difference discretization and energy-minimization solver for the
//! Dirichlet problem -L_p u = F(x, u), u = 0 on the boundary of a box,
//! plus the theorem-level experiments built on it.

mod energy;
mod experiments;
mod grid;
mod ncg;
mod reaction;

pub use energy::{apply_p_operator, discrete_energy, weak_residual, Load};
pub use experiments::{
    comparison_experiment, trivial_solution_experiment, uniqueness_experiment, ExperimentReport,
    TrivialVariant,
};
pub use grid::{discretize, Grid};
pub use ncg::{solve_dirichlet, GridSolution, Init, SolveOpts};
pub use reaction::Reaction;

use crate::expr::EvalError;
use thiserror::Error;

#[derive(Debug, Error, Clone)]
pub enum SolverError {
    #[error("grid too coarse: axis {axis} has {count} nodes, need at least 4")]
    TooCoarse { axis: usize, count: usize },
    #[error("regularization eps must be positive")]
    NonPositiveEps,
    #[error("line search stalled at iteration {0}")]
    LineSearchStall(usize),
    #[error("no convergence after {iterations} iterations (last gradient norm {gradient_norm:.3e})")]
    NoConvergence {
        iterations: usize,
        gradient_norm: f64,
        trace: Vec<f64>,
    },
    #[error("fixed-point iteration diverged after {0} sweeps")]
    FixedPointDivergence(usize),
    #[error("reaction violates assumption {0}; experiment refused")]
    ReactionViolatesAssumptions(&'static str),
    #[error("schrodinger potential must be nonnegative: q = {value:.3e} at node {node}")]
    NegativePotential { node: usize, value: f64 },
    #[error("p must satisfy 1 < p <= Q = {q} for this experiment, got {p}")]
    BadExponent { p: f64, q: u32 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}
