//! Energy-conserving multi-constraint reflections.
//!
//! Both operators compute `p+ = p + N_K(q) lambda` with `lambda >= 0` and
//! `E(q, p+) = E(q, p)` for an energy `E` quadratic in `p`. The generalized
//! operator repeatedly projects on the currently violated subset until no
//! constraint in `K` has inward normal velocity. The Moreau operator performs
//! one projection over the whole of `K` and rejects the result if it is not
//! kinematically feasible.

pub mod nnls;

use crate::cones::{projected_active_gradient, IndexSet, Tolerances};
use crate::error::{ModelError, SolverError};
use crate::quadrature::modified_hamiltonian_verlet;
use crate::sysmodel::{MechanicalSystem, PhaseState};
use crate::{Matrix, Vector};

/// The energy a reflection must conserve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyFunction {
    /// `H = 1/2 p^T M^-1 p + V(q)`.
    ContinuousH,
    /// Second-order shadow Hamiltonian of velocity Verlet with step `h`.
    VerletNumericalH { h: f64 },
}

impl EnergyFunction {
    pub fn name(&self) -> &'static str {
        match self {
            EnergyFunction::ContinuousH => "continuous",
            EnergyFunction::VerletNumericalH { .. } => "verlet-numerical",
        }
    }

    pub fn evaluate(&self, sys: &MechanicalSystem, q: &Vector, p: &Vector) -> Result<f64, ModelError> {
        let s = PhaseState::new(q.clone(), p.clone(), 0.0);
        match *self {
            EnergyFunction::ContinuousH => Ok(sys.hamiltonian(&s)),
            EnergyFunction::VerletNumericalH { h } => modified_hamiltonian_verlet(sys, &s, h),
        }
    }

    /// Matrix `A` with `E(q, p) = 1/2 p^T A p + c(q)`. Errors when `A` is not
    /// positive definite (very large steps against a strongly concave `V`).
    pub fn quadratic_form(&self, sys: &MechanicalSystem, q: &Vector) -> Result<Matrix, ModelError> {
        match *self {
            EnergyFunction::ContinuousH => Ok(sys.mass_inv().clone()),
            EnergyFunction::VerletNumericalH { h } => {
                let minv = sys.mass_inv();
                let hess = sys.potential_hessian(q)?;
                let a = minv + minv * hess * minv * (h * h / 6.0);
                let a = (&a + a.transpose()) * 0.5;
                if a.clone().cholesky().is_none() {
                    return Err(ModelError::IndefiniteEnergy);
                }
                Ok(a)
            }
        }
    }
}

/// Which multi-impact operator to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReflectionKind {
    /// Iterated projection on the violated subset.
    #[default]
    Generalized,
    /// Single projection over the full constraint subset.
    Moreau,
}

impl ReflectionKind {
    pub fn name(self) -> &'static str {
        match self {
            ReflectionKind::Generalized => "generalized",
            ReflectionKind::Moreau => "moreau",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionResult {
    pub p_plus: Vector,
    /// Accumulated impulse per entry of `K`, in `K` order.
    pub lambda: Vector,
    /// Number of projection passes performed.
    pub iterations: usize,
}

/// Non-negative `lambda` such that `p + G lambda` conserves the energy with
/// quadratic form `a`: minimizes `1/2 l^T (G^T A G) l + (2 G^T A p)^T l`.
pub fn energy_projection_nnls(g: &Matrix, a: &Matrix, p: &Vector) -> Result<Vector, SolverError> {
    let ag = a * g;
    let q = g.transpose() * &ag;
    let q = (&q + q.transpose()) * 0.5;
    let c = ag.transpose() * p * 2.0;
    nnls::nnls_normal(&q, &c)
}

fn validate(sys: &MechanicalSystem, k: &IndexSet) -> Result<(), ModelError> {
    let count = sys.num_inequalities();
    match k.iter().find(|&&i| i >= count) {
        Some(&index) => Err(ModelError::IndexOutOfRange {
            kind: "inequality",
            index,
            count,
        }),
        None => Ok(()),
    }
}

fn unchanged(p: &Vector, k: usize) -> ReflectionResult {
    ReflectionResult {
        p_plus: p.clone(),
        lambda: Vector::zeros(k),
        iterations: 0,
    }
}

/// Iterated energy-preserving projection (violated-subset loop). Stops when
/// every constraint in `K` has normal velocity `>= -eps_tangent`; gives up
/// after `100 |K|` passes.
pub fn generalized_reflection(
    sys: &MechanicalSystem,
    q: &Vector,
    p: &Vector,
    k: &IndexSet,
    energy: EnergyFunction,
    tol: &Tolerances,
) -> Result<ReflectionResult, SolverError> {
    validate(sys, k)?;
    if k.is_empty() {
        return Ok(unchanged(p, 0));
    }
    let normals = projected_active_gradient(sys, q, k);
    let minv_n = sys.mass_inv() * &normals;
    let mut a: Option<Matrix> = None;
    let mut p_cur = p.clone();
    let mut lambda = Vector::zeros(k.len());
    let cap = 100 * k.len();
    for pass in 0..=cap {
        let u = minv_n.transpose() * &p_cur;
        let violated: Vec<usize> = (0..k.len()).filter(|&j| u[j] < -tol.eps_tangent).collect();
        if violated.is_empty() {
            return Ok(ReflectionResult {
                p_plus: p_cur,
                lambda,
                iterations: pass,
            });
        }
        if pass == cap {
            break;
        }
        if a.is_none() {
            a = Some(energy.quadratic_form(sys, q)?);
        }
        let gv = normals.select_columns(&violated);
        let step = energy_projection_nnls(&gv, a.as_ref().unwrap(), &p_cur)?;
        p_cur += &gv * &step;
        for (col, &j) in violated.iter().enumerate() {
            lambda[j] += step[col];
        }
    }
    Err(SolverError::NonTermination {
        iterations: cap,
        last_momentum: p_cur,
    })
}

/// Single energy-preserving projection over all of `K`, followed by a
/// feasibility check.
pub fn moreau_reflection(
    sys: &MechanicalSystem,
    q: &Vector,
    p: &Vector,
    k: &IndexSet,
    energy: EnergyFunction,
    tol: &Tolerances,
) -> Result<ReflectionResult, SolverError> {
    validate(sys, k)?;
    if k.is_empty() {
        return Ok(unchanged(p, 0));
    }
    let normals = projected_active_gradient(sys, q, k);
    let minv_n = sys.mass_inv() * &normals;
    let u = minv_n.transpose() * p;
    if u.iter().all(|&x| x >= -tol.eps_tangent) {
        return Ok(unchanged(p, k.len()));
    }
    let a = energy.quadratic_form(sys, q)?;
    let lambda = energy_projection_nnls(&normals, &a, p)?;
    let p_plus = p + &normals * &lambda;
    let min_u = (minv_n.transpose() * &p_plus).min();
    if min_u < -tol.eps_tangent {
        return Err(SolverError::InfeasibleReflection {
            min_normal_velocity: min_u,
        });
    }
    Ok(ReflectionResult {
        p_plus,
        lambda,
        iterations: 1,
    })
}

pub fn reflect(
    kind: ReflectionKind,
    sys: &MechanicalSystem,
    q: &Vector,
    p: &Vector,
    k: &IndexSet,
    energy: EnergyFunction,
    tol: &Tolerances,
) -> Result<ReflectionResult, SolverError> {
    match kind {
        ReflectionKind::Generalized => generalized_reflection(sys, q, p, k, energy, tol),
        ReflectionKind::Moreau => moreau_reflection(sys, q, p, k, energy, tol),
    }
}
