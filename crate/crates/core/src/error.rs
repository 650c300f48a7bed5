use thiserror::Error;

use crate::Vector;

/// Errors raised while building or querying a [`crate::MechanicalSystem`].
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("mass matrix must be {expected}x{expected}, got {rows}x{cols}")]
    MassShape {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("mass matrix is not symmetric (relative asymmetry {0:e})")]
    MassNotSymmetric(f64),
    #[error("mass matrix is not positive definite")]
    MassNotPositiveDefinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("{kind} constraint index {index} out of range ({count} registered)")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        count: usize,
    },
    #[error("potential Hessian is not available for this system")]
    MissingHessian,
    #[error("energy quadratic form is not positive definite at this configuration")]
    IndefiniteEnergy,
}

/// Failures of the nonlinear, complementarity and NNLS solves.
#[derive(Debug, Clone, Error)]
pub enum SolverError {
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("no admissible active set found for the complementarity problem ({tried} sets tried)")]
    Infeasible { tried: usize },
    #[error("non-negative least squares stagnated after {iterations} iterations")]
    NnlsStagnation { iterations: usize },
    #[error("reflection did not terminate within {iterations} passes")]
    NonTermination { iterations: usize, last_momentum: Vector },
    #[error("reflection produced a kinematically infeasible momentum (min normal velocity {min_normal_velocity:e})")]
    InfeasibleReflection { min_normal_velocity: f64 },
    #[error("no sign change of constraint {index} on the bracket")]
    NoSignChange { index: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Failure of a single integrator step.
#[derive(Debug, Clone, Error)]
pub enum IntegratorError {
    #[error("discrete left-tangency precondition violated by constraint {index}; use the generalized integrator for nonsmooth states")]
    NotTangent { index: usize },
    #[error("collision step exceeded {0} impact events")]
    EventCap(usize),
    #[error("state became non-finite")]
    NonFinite,
    #[error("energy blow-up: H = {energy:e}")]
    BlowUp { energy: f64 },
    #[error("invalid integrator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
