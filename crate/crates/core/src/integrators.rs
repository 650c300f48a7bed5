//! Time-stepping schemes.
//!
//! * [`gvi_step`]: reflection over the extended active set, then a variational
//!   step that keeps tangential contacts on the boundary.
//! * [`extended_reflection_step`]: the same pipeline with no smooth contacts.
//! * [`dsi_step`]: the discrete-smooth integrator, valid only when every active
//!   constraint sees tangential momentum.
//! * [`direct_midpoint_step`] and [`newmark_step`]: direct-substitution
//!   baselines that treat the constraint force like any other force.
//! * [`collision_step`]: sub-steps to each impact, reflects, and finishes the
//!   step with the remaining time.

use crate::cones::{self, IndexSet, Tolerances};
use crate::diagnostics::Event;
use crate::error::{IntegratorError, SolverError};
use crate::quadrature::{Quadrature, Rule};
use crate::reflection::{self, EnergyFunction, ReflectionKind};
use crate::solvers::{self, KktSystem};
use crate::sysmodel::{Constraint, MechanicalSystem, PhaseState};
use crate::{Matrix, Vector};

/// Impact events allowed inside one collision step before giving up.
pub const EVENT_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Generalized variational integrator. With `linearized`, each step
    /// replaces every inequality by its linearization at the step start.
    Gvi { linearized: bool },
    Dsi,
    ExtendedReflection,
    Collision,
    /// Direct-substitution midpoint with the constraint evaluated at
    /// `(1 - alpha) q + alpha q'` (`alpha = 1/2` or `1`).
    DirectMidpoint { alpha: f64 },
    Newmark { beta: f64, gamma: f64, imex: bool },
}

impl Method {
    pub fn name(&self) -> String {
        match *self {
            Method::Gvi { linearized: false } => "gvi".into(),
            Method::Gvi { linearized: true } => "gvi-linearized".into(),
            Method::Dsi => "dsi".into(),
            Method::ExtendedReflection => "extended-reflection".into(),
            Method::Collision => "collision".into(),
            Method::DirectMidpoint { alpha } if alpha == 0.5 => "direct-midpoint".into(),
            Method::DirectMidpoint { alpha } if alpha == 1.0 => "direct-endpoint".into(),
            Method::DirectMidpoint { alpha } => format!("direct-alpha-{alpha}"),
            Method::Newmark { imex: false, .. } => "newmark".into(),
            Method::Newmark { imex: true, .. } => "newmark-imex".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub quadrature: Quadrature,
    pub reflection: ReflectionKind,
    pub energy: EnergyFunction,
    pub tolerances: Tolerances,
}

impl IntegratorConfig {
    pub fn new(method: Method, quadrature: Quadrature) -> Self {
        Self {
            method,
            quadrature,
            reflection: ReflectionKind::Generalized,
            energy: EnergyFunction::ContinuousH,
            tolerances: Tolerances::default(),
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_energy(mut self, energy: EnergyFunction) -> Self {
        self.energy = energy;
        self
    }

    pub fn with_reflection(mut self, reflection: ReflectionKind) -> Self {
        self.reflection = reflection;
        self
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.quadrature = self.quadrature.with_step(h);
        if let EnergyFunction::VerletNumericalH { .. } = self.energy {
            self.energy = EnergyFunction::VerletNumericalH { h };
        }
        self
    }

    pub fn h(&self) -> f64 {
        self.quadrature.h
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        self.tolerances.validate().map_err(IntegratorError::Config)?;
        match self.method {
            Method::DirectMidpoint { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                Err(IntegratorError::Config(format!("alpha must lie in (0, 1], got {alpha}")))
            }
            Method::Newmark { beta, gamma, .. } if !((0.0..=0.5).contains(&beta) && (0.0..=1.0).contains(&gamma)) => Err(
                IntegratorError::Config(format!("Newmark needs beta in [0, 1/2] and gamma in [0, 1], got {beta}, {gamma}")),
            ),
            _ => match self.energy {
                EnergyFunction::VerletNumericalH { h } if !(h >= 0.0 && h.is_finite()) => {
                    Err(IntegratorError::Config(format!("energy step must be finite and non-negative, got {h}")))
                }
                _ => Ok(()),
            },
        }
    }
}

/// Result of one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: PhaseState,
    pub event: Event,
    /// Reflection impulses, one per entry of `active`.
    pub impulse: Vector,
    /// Constraint-force multipliers of the implicit solve.
    pub force: Vector,
    /// Constraint set the step reflected on (or enforced, for direct methods).
    pub active: IndexSet,
}

fn finish(state: PhaseState, event: Event, impulse: Vector, force: Vector, active: IndexSet) -> Result<StepOutcome, IntegratorError> {
    if !state.is_finite() {
        return Err(IntegratorError::NonFinite);
    }
    Ok(StepOutcome {
        state,
        event,
        impulse,
        force,
        active,
    })
}

/// Every inequality replaced by its first-order expansion at `q`.
pub fn linearize_inequalities(sys: &MechanicalSystem, q: &Vector) -> MechanicalSystem {
    let lin = sys
        .inequalities()
        .iter()
        .map(|c| {
            let a = c.grad(q);
            let b = c.eval(q) - a.dot(q);
            Constraint::affine(format!("{}-lin", c.name), a, b)
        })
        .collect();
    sys.with_inequalities_replaced(lin)
}

fn gvi_pipeline(sys: &MechanicalSystem, cfg: &IntegratorConfig, s: &PhaseState, smooth: bool) -> Result<StepOutcome, IntegratorError> {
    let tol = &cfg.tolerances;
    let quad = cfg.quadrature;
    let q = &s.q;
    let q_pred = solvers::forward_predictor(sys, quad, q, &s.p, tol)?;
    let mut extended = cones::extended_active_set(sys, q, &q_pred, tol);
    // constraints the step drives through the boundary first join the
    // reflection set; those still crossed afterwards are held on the boundary
    let mut forced = IndexSet::empty();
    let (refl, set, pos) = loop {
        let refl = reflection::reflect(cfg.reflection, sys, q, &s.p, &extended, cfg.energy, tol)?;
        let set = if smooth {
            cones::smooth_set(sys, q, &refl.p_plus, tol).union(&forced)
        } else {
            IndexSet::empty()
        };
        let pos = solvers::position_update_solve(sys, quad, q, &refl.p_plus, &set, tol)?;
        if !smooth {
            break (refl, set, pos);
        }
        let caught = cones::violated_set(sys, &pos.q_next, tol).filter(|i| !set.contains(i));
        if caught.is_empty() {
            break (refl, set, pos);
        }
        let fresh = caught.filter(|i| !extended.contains(i));
        if fresh.is_empty() {
            forced = forced.union(&caught);
        } else {
            extended = extended.union(&fresh);
        }
    };
    let q1 = pos.q_next;
    let still_on = set.filter(|i| sys.inequalities()[i].eval(&q1).abs() <= tol.eps_active);
    let (p1, _, _) = solvers::momentum_update_solve(sys, quad, q, &q1, &still_on);
    let event = if refl.lambda.iter().any(|&l| l > 0.0) {
        Event::Reflection
    } else if !set.is_empty() {
        Event::SmoothContact
    } else {
        Event::None
    };
    finish(PhaseState::new(q1, p1, s.t + quad.h), event, refl.lambda, pos.lambda, extended)
}

/// One step of the generalized variational integrator.
pub fn gvi_step(sys: &MechanicalSystem, cfg: &IntegratorConfig, s: &PhaseState) -> Result<StepOutcome, IntegratorError> {
    if let Method::Gvi { linearized: true } = cfg.method {
        let lin = linearize_inequalities(sys, &s.q);
        return gvi_pipeline(&lin, cfg, s, true);
    }
    gvi_pipeline(sys, cfg, s, true)
}

/// Full-step reflections only: the generalized pipeline with an empty smooth
/// set.
pub fn extended_reflection_step(sys: &MechanicalSystem, cfg: &IntegratorConfig, s: &PhaseState) -> Result<StepOutcome, IntegratorError> {
    gvi_pipeline(sys, cfg, s, false)
}

/// One step of the discrete-smooth integrator. Fails with
/// [`IntegratorError::NotTangent`] when an active constraint has a nonzero
/// normal velocity.
pub fn dsi_step(sys: &MechanicalSystem, cfg: &IntegratorConfig, s: &PhaseState) -> Result<StepOutcome, IntegratorError> {
    let tol = &cfg.tolerances;
    let quad = cfg.quadrature;
    let active = cones::active_set(sys, &s.q, tol);
    let tangent = cones::smooth_set(sys, &s.q, &s.p, tol);
    if let Some(&index) = active.iter().find(|&&i| !tangent.contains(i)) {
        return Err(IntegratorError::NotTangent { index });
    }
    let pos = solvers::position_update_solve(sys, quad, &s.q, &s.p, &active, tol)?;
    let q1 = pos.q_next;
    let on = IndexSet::from_iter((0..sys.num_inequalities()).filter(|&i| sys.inequalities()[i].eval(&q1).abs() <= tol.eps_active));
    let (p1, _, _) = solvers::momentum_update_solve(sys, quad, &s.q, &q1, &on);
    let event = if active.is_empty() { Event::None } else { Event::SmoothContact };
    finish(PhaseState::new(q1, p1, s.t + quad.h), event, Vector::zeros(0), pos.lambda, active)
}

/// Optimality system of the direct-substitution midpoint rule:
/// `M x - M q - h p + h^2/2 grad V((q + x)/2) - alpha G(y) lambda = 0` with
/// `y = (1 - alpha) q + alpha x` and `g(y) >= 0`.
struct DirectMidpoint<'a> {
    sys: &'a MechanicalSystem,
    q: &'a Vector,
    p: &'a Vector,
    h: f64,
    alpha: f64,
}

impl DirectMidpoint<'_> {
    fn y(&self, x: &Vector) -> Vector {
        self.q * (1.0 - self.alpha) + x * self.alpha
    }
}

impl KktSystem for DirectMidpoint<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }
    fn num_ineq(&self) -> usize {
        self.sys.num_inequalities()
    }
    fn num_eq(&self) -> usize {
        self.sys.num_equalities()
    }
    fn stationarity(&self, x: &Vector, lambda: &Vector, nu: &Vector) -> Vector {
        let mid = (self.q + x) * 0.5;
        let y = self.y(x);
        let g = self.sys.constraint_gradient_matrix(&y, &IndexSet::all(self.num_ineq()), crate::sysmodel::ConstraintKind::Inequality);
        let g = g.expect("all indices valid");
        self.sys.mass() * (x - self.q) - self.p * self.h + self.sys.potential_gradient(&mid) * (0.5 * self.h * self.h)
            - g * lambda * self.alpha
            - self.sys.equality_gradients(&y) * nu * self.alpha
    }
    fn jacobian_x(&self, x: &Vector, lambda: &Vector, nu: &Vector) -> Matrix {
        let mid = (self.q + x) * 0.5;
        let y = self.y(x);
        let a2 = self.alpha * self.alpha;
        let mut jac = self.sys.mass() + self.sys.potential_hessian_or_fd(&mid) * (0.25 * self.h * self.h);
        for (i, c) in self.sys.inequalities().iter().enumerate() {
            if lambda[i] != 0.0 {
                jac -= c.hess(&y) * (a2 * lambda[i]);
            }
        }
        for (j, c) in self.sys.equalities().iter().enumerate() {
            if nu[j] != 0.0 {
                jac -= c.hess(&y) * (a2 * nu[j]);
            }
        }
        jac
    }
    fn lambda_matrix(&self, x: &Vector) -> Matrix {
        -self.ineq_gradients(x)
    }
    fn nu_matrix(&self, x: &Vector) -> Matrix {
        -self.eq_gradients(x)
    }
    fn ineq_values(&self, x: &Vector) -> Vector {
        self.sys.inequality_values(&self.y(x))
    }
    fn ineq_gradients(&self, x: &Vector) -> Matrix {
        let g = self
            .sys
            .constraint_gradient_matrix(&self.y(x), &IndexSet::all(self.num_ineq()), crate::sysmodel::ConstraintKind::Inequality)
            .expect("all indices valid");
        g * self.alpha
    }
    fn eq_values(&self, x: &Vector) -> Vector {
        self.sys.equality_values(&self.y(x))
    }
    fn eq_gradients(&self, x: &Vector) -> Matrix {
        self.sys.equality_gradients(&self.y(x)) * self.alpha
    }
    fn residual_scale(&self) -> f64 {
        self.h * self.p.amax()
    }
}

fn contact_event(force: &Vector) -> Event {
    if force.iter().any(|&l| l > 0.0) {
        Event::SmoothContact
    } else {
        Event::None
    }
}

/// Direct-substitution implicit midpoint step, solved in optimization form;
/// `p' = (2/h) M (q' - q) - p`.
pub fn direct_midpoint_step(
    sys: &MechanicalSystem,
    cfg: &IntegratorConfig,
    s: &PhaseState,
    alpha: f64,
) -> Result<StepOutcome, IntegratorError> {
    let h = cfg.h();
    let tol = &cfg.tolerances;
    let prob = DirectMidpoint {
        sys,
        q: &s.q,
        p: &s.p,
        h,
        alpha,
    };
    let x0 = solvers::forward_predictor(sys, Quadrature::new(Rule::Midpoint, h), &s.q, &s.p, tol)
        .unwrap_or_else(|_| &s.q + sys.velocity(&s.p) * h);
    let sol = solvers::solve_complementarity(&prob, &x0, &IndexSet::empty(), tol)?;
    let p1 = sys.mass() * (&sol.x - &s.q) * (2.0 / h) - &s.p;
    let event = contact_event(&sol.lambda);
    finish(PhaseState::new(sol.x, p1, s.t + h), event, Vector::zeros(0), sol.lambda, sol.working)
}

/// Newmark position equation with the constraint force as an extra force:
///
/// `M (x - q - h v) + h^2/2 [(1 - 2b)(grad V(q) - r) + 2b grad V(x)] - c G(x) lambda = 0`
///
/// where `r` is the previous step's constraint force, `c = h^2 b` for the
/// plain scheme and `c = h^2/2` (fully implicit force) for IMEX.
struct NewmarkPosition<'a> {
    sys: &'a MechanicalSystem,
    q: &'a Vector,
    v: Vector,
    explicit_force: Vector,
    h: f64,
    beta: f64,
    c: f64,
}

impl KktSystem for NewmarkPosition<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }
    fn num_ineq(&self) -> usize {
        self.sys.num_inequalities()
    }
    fn num_eq(&self) -> usize {
        self.sys.num_equalities()
    }
    fn stationarity(&self, x: &Vector, lambda: &Vector, nu: &Vector) -> Vector {
        let hh = self.h * self.h;
        self.sys.mass() * (x - self.q - &self.v * self.h)
            + (&self.explicit_force * (1.0 - 2.0 * self.beta) + self.sys.potential_gradient(x) * (2.0 * self.beta)) * (0.5 * hh)
            + self.lambda_matrix(x) * lambda
            + self.nu_matrix(x) * nu
    }
    fn jacobian_x(&self, x: &Vector, lambda: &Vector, nu: &Vector) -> Matrix {
        let mut jac = self.sys.mass().clone();
        if self.beta != 0.0 {
            jac += self.sys.potential_hessian_or_fd(x) * (self.h * self.h * self.beta);
        }
        for (i, c) in self.sys.inequalities().iter().enumerate() {
            if lambda[i] != 0.0 {
                jac -= c.hess(x) * (self.c * lambda[i]);
            }
        }
        for (j, c) in self.sys.equalities().iter().enumerate() {
            if nu[j] != 0.0 {
                jac -= c.hess(x) * (self.c * nu[j]);
            }
        }
        jac
    }
    fn lambda_matrix(&self, x: &Vector) -> Matrix {
        -self.ineq_gradients(x) * self.c
    }
    fn nu_matrix(&self, x: &Vector) -> Matrix {
        -self.eq_gradients(x) * self.c
    }
    fn ineq_values(&self, x: &Vector) -> Vector {
        self.sys.inequality_values(x)
    }
    fn ineq_gradients(&self, x: &Vector) -> Matrix {
        self.sys
            .constraint_gradient_matrix(x, &IndexSet::all(self.num_ineq()), crate::sysmodel::ConstraintKind::Inequality)
            .expect("all indices valid")
    }
    fn eq_values(&self, x: &Vector) -> Vector {
        self.sys.equality_values(x)
    }
    fn eq_gradients(&self, x: &Vector) -> Matrix {
        self.sys.equality_gradients(x)
    }
    fn residual_scale(&self) -> f64 {
        self.h * (self.sys.mass() * &self.v).amax()
    }
}

/// One Newmark step. `carry` is the constraint force of the previous step
/// (ignored by the IMEX variant); the returned vector is the force to carry
/// into the next step.
pub fn newmark_step(
    sys: &MechanicalSystem,
    cfg: &IntegratorConfig,
    s: &PhaseState,
    carry: &Vector,
    beta: f64,
    gamma: f64,
    imex: bool,
) -> Result<(StepOutcome, Vector), IntegratorError> {
    let h = cfg.h();
    let tol = &cfg.tolerances;
    let grad_q = sys.potential_gradient(&s.q);
    let explicit_force = if imex { grad_q.clone() } else { &grad_q - carry };
    let c = if imex { 0.5 * h * h } else { h * h * beta };
    let prob = NewmarkPosition {
        sys,
        q: &s.q,
        v: sys.velocity(&s.p),
        explicit_force: explicit_force.clone(),
        h,
        beta,
        c,
    };
    let x0 = &s.q + &prob.v * h - sys.velocity(&explicit_force) * (0.5 * h * h);
    let sol = solvers::solve_complementarity(&prob, &x0, &IndexSet::empty(), tol)?;
    if !imex && beta == 0.0 {
        // no implicit constraint force is available to stop a crossing
        let g = sys.inequality_values(&sol.x);
        if g.iter().any(|&v| v < -tol.eps_active) {
            return Err(SolverError::Infeasible { tried: 1 }.into());
        }
    }
    let x = sol.x;
    let g_new = prob.ineq_gradients(&x);
    let f_new = prob.eq_gradients(&x);
    let mut reaction = &g_new * &sol.lambda + &f_new * &sol.nu;
    if !imex && beta == 0.0 {
        reaction.fill(0.0);
    }
    let grad_x = sys.potential_gradient(&x);
    let p1 = if imex {
        &s.p - (&grad_q * (1.0 - gamma) + &grad_x * gamma) * h + &reaction * h
    } else {
        &s.p - (&explicit_force * (1.0 - gamma) + (&grad_x - &reaction) * gamma) * h
    };
    let next_carry = if imex { Vector::zeros(sys.dim()) } else { reaction };
    let event = contact_event(&sol.lambda);
    let out = finish(PhaseState::new(x, p1, s.t + h), event, Vector::zeros(0), sol.lambda, sol.working)?;
    Ok((out, next_carry))
}

fn free_substep(sys: &MechanicalSystem, quad: Quadrature, s: &PhaseState, tol: &Tolerances) -> Result<PhaseState, SolverError> {
    let x = solvers::forward_predictor(sys, quad, &s.q, &s.p, tol)?;
    let p = quad.d2(sys, &s.q, &x);
    Ok(PhaseState::new(x, p, s.t + quad.h))
}

fn crossed(sys: &MechanicalSystem, q: &Vector) -> bool {
    sys.inequalities().iter().any(|c| c.eval(q) < 0.0)
}

/// One step of the collision integrator: unconstrained sub-steps interrupted
/// at every impact. Impacts are located by bisection on the sub-step length
/// so that the landing state is admissible; all constraints within
/// `eps_active` of contact there are reflected jointly.
pub fn collision_step(sys: &MechanicalSystem, cfg: &IntegratorConfig, s: &PhaseState) -> Result<StepOutcome, IntegratorError> {
    let tol = &cfg.tolerances;
    let h = cfg.h();
    let t_end = s.t + h;
    let mut cur = s.clone();
    let mut remaining = h;
    let mut events = 0usize;
    let mut impulse = Vector::zeros(0);
    let mut reflected = IndexSet::empty();

    loop {
        let full = free_substep(sys, cfg.quadrature.with_step(remaining), &cur, tol)?;
        if !crossed(sys, &full.q) {
            let mut state = full;
            state.t = t_end;
            let event = if events > 0 { Event::Reflection } else { Event::None };
            return finish(state, event, impulse, Vector::zeros(0), reflected);
        }
        events += 1;
        if events > EVENT_CAP {
            return Err(IntegratorError::EventCap(EVENT_CAP));
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut lo_state = cur.clone();
        let mut hi_q = full.q.clone();
        let near_now = cones::active_set(sys, &cur.q, tol);
        // already in contact with a constraint the sub-step crosses: the
        // event is now, and shrinking sub-steps would only chase rounding
        let v = sys.velocity(&cur.p);
        let immediate = near_now.iter().any(|&i| {
            let c = &sys.inequalities()[i];
            c.eval(&full.q) < 0.0 && c.grad(&cur.q).dot(&v) <= tol.eps_tangent
        });
        for _ in 0..if immediate { 0 } else { solvers::MAX_BISECTIONS } {
            let mid = 0.5 * (lo + hi);
            if (hi - lo) * remaining <= 1e-14 * h {
                break;
            }
            let trial = free_substep(sys, cfg.quadrature.with_step(mid * remaining), &cur, tol)?;
            if crossed(sys, &trial.q) {
                hi = mid;
                hi_q = trial.q;
            } else {
                lo = mid;
                let touching = sys.inequality_values(&trial.q).min() <= tol.eps_active;
                lo_state = trial;
                if touching {
                    break;
                }
            }
        }
        let near = cones::active_set(sys, &lo_state.q, tol);
        let k = if immediate {
            near
        } else {
            let crossing: IndexSet = (0..sys.num_inequalities())
                .filter(|&i| sys.inequalities()[i].eval(&hi_q) < 0.0)
                .collect();
            near.union(&crossing)
        };
        let r = reflection::reflect(cfg.reflection, sys, &lo_state.q, &lo_state.p, &k, cfg.energy, tol)?;
        impulse = r.lambda;
        reflected = k;
        cur = PhaseState::new(lo_state.q, r.p_plus, lo_state.t);
        remaining -= lo * remaining;
        if remaining <= 0.0 {
            cur.t = t_end;
            return finish(cur, Event::Reflection, impulse, Vector::zeros(0), reflected);
        }
    }
}

/// Owns a configuration and any state carried between steps (the previous
/// constraint force of the plain Newmark scheme).
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    sys: &'a MechanicalSystem,
    cfg: IntegratorConfig,
    carry: Vector,
}

impl<'a> Stepper<'a> {
    pub fn new(sys: &'a MechanicalSystem, cfg: IntegratorConfig) -> Result<Self, IntegratorError> {
        cfg.validate()?;
        Ok(Self {
            sys,
            cfg,
            carry: Vector::zeros(sys.dim()),
        })
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    pub fn system(&self) -> &MechanicalSystem {
        self.sys
    }

    pub fn step(&mut self, s: &PhaseState) -> Result<StepOutcome, IntegratorError> {
        self.sys.check_dim(&s.q)?;
        self.sys.check_dim(&s.p)?;
        let (sys, cfg) = (self.sys, &self.cfg);
        match cfg.method {
            Method::Gvi { .. } => gvi_step(sys, cfg, s),
            Method::ExtendedReflection => extended_reflection_step(sys, cfg, s),
            Method::Dsi => dsi_step(sys, cfg, s),
            Method::Collision => collision_step(sys, cfg, s),
            Method::DirectMidpoint { alpha } => direct_midpoint_step(sys, cfg, s, alpha),
            Method::Newmark { beta, gamma, imex } => {
                let (out, carry) = newmark_step(sys, cfg, s, &self.carry, beta, gamma, imex)?;
                self.carry = carry;
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::Potential;

    fn particle() -> MechanicalSystem {
        MechanicalSystem::unit_mass(1, Potential::linear(Vector::from_element(1, 9.8)))
            .unwrap()
            .with_inequality(Constraint::affine("ground", Vector::from_element(1, 1.0), 0.0))
    }

    fn state(q: f64, p: f64) -> PhaseState {
        PhaseState::new(Vector::from_element(1, q), Vector::from_element(1, p), 0.0)
    }

    fn cfg(method: Method, rule: Rule, h: f64) -> IntegratorConfig {
        IntegratorConfig::new(method, Quadrature::new(rule, h))
    }

    #[test]
    fn gvi_bounce_from_ground() {
        let sys = particle();
        let c = cfg(Method::Gvi { linearized: false }, Rule::Verlet, 0.1);
        let out = gvi_step(&sys, &c, &state(0.0, -1.0)).unwrap();
        assert_eq!(out.event, Event::Reflection);
        assert_eq!(out.impulse[0], 2.0);
        assert!((out.state.q[0] - 0.051).abs() < 1e-15);
        assert!((out.state.p[0] - 0.02).abs() < 1e-14);
        assert!((sys.hamiltonian(&out.state) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gvi_resting_contact() {
        let sys = particle();
        let c = cfg(Method::Gvi { linearized: false }, Rule::Verlet, 0.1);
        let out = gvi_step(&sys, &c, &state(0.0, 0.0)).unwrap();
        assert!(out.state.q[0].abs() < 1e-12);
        assert!(out.state.p[0].abs() < 1e-12);
        assert!(out.force[0] > 0.0);
        assert_eq!(out.event, Event::SmoothContact);
    }

    #[test]
    fn direct_endpoint_dissipates() {
        let sys = particle();
        let c = cfg(Method::DirectMidpoint { alpha: 1.0 }, Rule::Midpoint, 0.1);
        let s = state(0.01, -1.0);
        let out = direct_midpoint_step(&sys, &c, &s, 1.0).unwrap();
        assert!(out.state.q[0].abs() < 1e-12);
        assert!((out.state.p[0] - 0.8).abs() < 1e-10);
        assert!((sys.hamiltonian(&s) - 0.598).abs() < 1e-12);
        assert!((sys.hamiltonian(&out.state) - 0.32).abs() < 1e-10);
    }

    #[test]
    fn newmark_special_cases_in_free_flight() {
        let sys = MechanicalSystem::unit_mass(1, Potential::quadratic(Matrix::from_element(1, 1, 4.0), Vector::zeros(1))).unwrap();
        let s = state(0.3, 0.2);
        let h = 0.1;
        let zero = Vector::zeros(1);
        // explicit Newmark: x = q + h v - h^2/2 V'(q)
        let c = cfg(Method::Newmark { beta: 0.0, gamma: 0.5, imex: false }, Rule::Verlet, h);
        let (out, _) = newmark_step(&sys, &c, &s, &zero, 0.0, 0.5, false).unwrap();
        let x = 0.3 + h * 0.2 - 0.5 * h * h * 1.2;
        assert!((out.state.q[0] - x).abs() < 1e-14);
        assert!((out.state.p[0] - (0.2 - 0.5 * h * (1.2 + 4.0 * x))).abs() < 1e-14);
        // trapezoidal: x solves x = q + h v - h^2/4 (V'(q) + V'(x))
        let (out, _) = newmark_step(&sys, &c, &s, &zero, 0.25, 0.5, false).unwrap();
        let x = (0.3 + h * 0.2 - 0.25 * h * h * 1.2) / (1.0 + 0.25 * h * h * 4.0);
        assert!((out.state.q[0] - x).abs() < 1e-13);
    }

    #[test]
    fn collision_step_reflects_mid_step() {
        let sys = particle();
        let c = cfg(Method::Collision, Rule::Verlet, 0.1);
        let s = state(0.05, -1.0);
        let out = collision_step(&sys, &c, &s).unwrap();
        assert_eq!(out.event, Event::Reflection);
        assert!(out.state.q[0] >= 0.0);
        assert!(out.state.p[0] > 0.0);
        assert!((out.state.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn dsi_rejects_normal_approach() {
        let sys = particle();
        let c = cfg(Method::Dsi, Rule::Verlet, 0.1);
        assert!(matches!(dsi_step(&sys, &c, &state(0.0, -1.0)), Err(IntegratorError::NotTangent { index: 0 })));
        assert!(dsi_step(&sys, &c, &state(0.0, 0.0)).is_ok());
    }

    #[test]
    fn config_validation() {
        let c = cfg(Method::Newmark { beta: 0.7, gamma: 0.5, imex: false }, Rule::Verlet, 0.1);
        assert!(c.validate().is_err());
        let c = cfg(Method::DirectMidpoint { alpha: 0.0 }, Rule::Midpoint, 0.1);
        assert!(c.validate().is_err());
        assert_eq!(Method::DirectMidpoint { alpha: 1.0 }.name(), "direct-endpoint");
    }
}
