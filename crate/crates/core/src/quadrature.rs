//! Discrete Lagrangians and their slot derivatives.
//!
//! With `L(q, v) = 1/2 v^T M v - V(q)` and `v = (q1 - q0) / h`:
//!
//! * midpoint: `L_d = h L((q0 + q1) / 2, v)`
//! * Verlet:   `L_d = h/2 [L(q0, v) + L(q1, v)]`
//!
//! `d1` and `d2` are the exact partial derivatives in the first and second
//! slot. Setting `d1(q, x) + p = 0` and `p' = d2(q, x)` gives the implicit
//! midpoint rule and velocity Störmer-Verlet respectively.

use crate::error::ModelError;
use crate::sysmodel::{MechanicalSystem, PhaseState};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Midpoint,
    Verlet,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Midpoint => "midpoint",
            Rule::Verlet => "verlet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub rule: Rule,
    pub h: f64,
}

impl Quadrature {
    pub fn new(rule: Rule, h: f64) -> Self {
        assert!(h > 0.0 && h.is_finite(), "time step must be positive, got {h}");
        Self { rule, h }
    }

    /// Same rule with a different step, used by the collision integrator's
    /// sub-steps.
    pub fn with_step(self, h: f64) -> Self {
        Self::new(self.rule, h)
    }

    fn lagrangian(sys: &MechanicalSystem, q: &Vector, v: &Vector) -> f64 {
        0.5 * v.dot(&(sys.mass() * v)) - sys.potential_energy(q)
    }

    pub fn discrete_lagrangian(&self, sys: &MechanicalSystem, q0: &Vector, q1: &Vector) -> f64 {
        let h = self.h;
        let v = (q1 - q0) / h;
        match self.rule {
            Rule::Midpoint => h * Self::lagrangian(sys, &((q0 + q1) * 0.5), &v),
            Rule::Verlet => 0.5 * h * (Self::lagrangian(sys, q0, &v) + Self::lagrangian(sys, q1, &v)),
        }
    }

    /// Gradient of `V` at the point each slot sees: the midpoint for both
    /// slots of the midpoint rule, the slot's own endpoint for Verlet.
    fn slot_force(&self, sys: &MechanicalSystem, q0: &Vector, q1: &Vector, first: bool) -> Vector {
        match self.rule {
            Rule::Midpoint => sys.potential_gradient(&((q0 + q1) * 0.5)),
            Rule::Verlet => sys.potential_gradient(if first { q0 } else { q1 }),
        }
    }

    pub fn d1(&self, sys: &MechanicalSystem, q0: &Vector, q1: &Vector) -> Vector {
        let h = self.h;
        -(sys.mass() * (q1 - q0)) / h - self.slot_force(sys, q0, q1, true) * (0.5 * h)
    }

    pub fn d2(&self, sys: &MechanicalSystem, q0: &Vector, q1: &Vector) -> Vector {
        let h = self.h;
        (sys.mass() * (q1 - q0)) / h - self.slot_force(sys, q0, q1, false) * (0.5 * h)
    }

    /// Jacobian of `d1(q0, x)` with respect to `x`.
    pub fn d1_jacobian(&self, sys: &MechanicalSystem, q0: &Vector, x: &Vector) -> Matrix {
        let h = self.h;
        let mut jac = -sys.mass() / h;
        if self.rule == Rule::Midpoint {
            jac -= sys.potential_hessian_or_fd(&((q0 + x) * 0.5)) * (0.25 * h);
        }
        jac
    }
}

/// Second-order modified (shadow) Hamiltonian of velocity Störmer-Verlet:
///
/// `H + h^2 [ 1/12 p^T M^-1 V'' M^-1 p - 1/24 V'^T M^-1 V' ]`.
///
/// Requires the analytic potential Hessian.
pub fn modified_hamiltonian_verlet(sys: &MechanicalSystem, s: &PhaseState, h: f64) -> Result<f64, ModelError> {
    let hess = sys.potential_hessian(&s.q)?;
    let grad = sys.potential_gradient(&s.q);
    let v = sys.velocity(&s.p);
    let a = sys.velocity(&grad);
    let correction = v.dot(&(&hess * &v)) / 12.0 - grad.dot(&a) / 24.0;
    Ok(sys.hamiltonian(s) + h * h * correction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::Potential;

    fn particle() -> MechanicalSystem {
        MechanicalSystem::unit_mass(1, Potential::linear(Vector::from_element(1, 9.8))).unwrap()
    }

    fn v1(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    #[test]
    fn pure_kinetic_lagrangian() {
        let sys = MechanicalSystem::unit_mass(1, Potential::zero(1)).unwrap();
        for rule in [Rule::Midpoint, Rule::Verlet] {
            let quad = Quadrature::new(rule, 1.0);
            assert_eq!(quad.discrete_lagrangian(&sys, &v1(0.0), &v1(1.0)), 0.5);
            assert_eq!(quad.d1(&sys, &v1(0.3), &v1(0.3))[0], 0.0);
            assert_eq!(quad.d2(&sys, &v1(0.3), &v1(0.3))[0], 0.0);
        }
    }

    #[test]
    fn gravity_lagrangian_values() {
        let sys = particle();
        let verlet = Quadrature::new(Rule::Verlet, 1.0);
        let mid = Quadrature::new(Rule::Midpoint, 1.0);
        assert!((verlet.discrete_lagrangian(&sys, &v1(0.0), &v1(1.0)) + 4.4).abs() < 1e-14);
        assert!((mid.discrete_lagrangian(&sys, &v1(0.0), &v1(1.0)) + 4.4).abs() < 1e-14);
        assert!((verlet.d1(&sys, &v1(0.0), &v1(1.0))[0] + 5.9).abs() < 1e-14);
        let short = Quadrature::new(Rule::Verlet, 0.1);
        assert!((short.d2(&sys, &v1(0.0), &v1(0.051))[0] - 0.02).abs() < 1e-14);
    }

    #[test]
    fn modified_hamiltonian_limits() {
        let sys = particle();
        let s = PhaseState::new(v1(0.4), v1(-1.3), 0.0);
        assert_eq!(modified_hamiltonian_verlet(&sys, &s, 0.0).unwrap(), sys.hamiltonian(&s));
        // the gradient term survives for a linear potential
        let expected = sys.hamiltonian(&s) - 0.01 * 9.8 * 9.8 / 24.0;
        assert!((modified_hamiltonian_verlet(&sys, &s, 0.1).unwrap() - expected).abs() < 1e-14);
        let no_hess = MechanicalSystem::unit_mass(1, Potential::new(|q| q[0], |_| v1(1.0))).unwrap();
        assert!(modified_hamiltonian_verlet(&no_hess, &s, 0.1).is_err());
    }
}
