//! Structure-preserving time integration for Hamiltonian systems subject to
//! equality and hard (unilateral) inequality constraints.
//!
//! The central method is the generalized variational integrator
//! ([`integrators::gvi_step`]): each fixed-size step applies an
//! energy-conserving multi-constraint reflection over an extended active set,
//! then a discrete variational step that keeps tangentially moving contacts
//! smoothly on the constraint boundary. The crate also ships the baselines it
//! is usually compared with (direct-substitution midpoint and Newmark schemes,
//! and a sub-stepping collision integrator), a library of benchmark scenarios,
//! diagnostics, and the `gvi` command-line driver.

pub mod cli;
pub mod cones;
pub mod diagnostics;
pub mod error;
pub mod integrators;
pub mod linalg;
pub mod quadrature;
pub mod reflection;
pub mod scenarios;
pub mod solvers;
pub mod sysmodel;

pub use cones::{IndexSet, Tolerances};
pub use error::{IntegratorError, ModelError, SolverError};
pub use integrators::{IntegratorConfig, Method, Stepper};
pub use quadrature::{Quadrature, Rule};
pub use reflection::{EnergyFunction, ReflectionKind, ReflectionResult};
pub use sysmodel::{Constraint, MechanicalSystem, PhaseState, Potential};

/// Dense column vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
