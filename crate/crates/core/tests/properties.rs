mod common;

use common::{boundary_instance, spd, unit, vector};
use gvi::cones::{self, IndexSet, Tolerances};
use gvi::diagnostics::momenta;
use gvi::integrators::{dsi_step, extended_reflection_step, gvi_step};
use gvi::reflection::{generalized_reflection, moreau_reflection, EnergyFunction};
use gvi::scenarios::{build_scenario, ScenarioName, ScenarioSpec};
use gvi::solvers::position_update_solve;
use gvi::{Constraint, IntegratorConfig, Matrix, MechanicalSystem, Method, PhaseState, Potential, Quadrature, Rule, Vector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn energies(h: f64) -> [EnergyFunction; 2] {
    [EnergyFunction::ContinuousH, EnergyFunction::VerletNumericalH { h }]
}

fn rule() -> impl Strategy<Value = Rule> {
    prop_oneof![Just(Rule::Midpoint), Just(Rule::Verlet)]
}

/// Random orthogonal matrix from the QR factor of a random square matrix.
fn orthogonal(r: &mut ChaCha8Rng, n: usize) -> Matrix {
    let a = Matrix::from_fn(n, n, |_, _| rand::Rng::random_range(r, -1.0..1.0));
    a.qr().q()
}

/// Unconstrained system with a mildly nonlinear potential and its analytic
/// gradient, for quadrature checks.
fn nonlinear_system(r: &mut ChaCha8Rng, n: usize) -> MechanicalSystem {
    let k = spd(r, n);
    let c = vector(r, n, 1.0);
    let (k1, k2) = (k.clone(), k);
    let (c1, c2) = (c.clone(), c);
    let pot = Potential::new(
        move |q: &Vector| 0.5 * q.dot(&(&k1 * q)) + c1.dot(q) + 0.25 * q.map(|x| x.powi(4)).sum(),
        move |q: &Vector| &k2 * q + &c2 + q.map(|x| x.powi(3)),
    );
    MechanicalSystem::new(spd(r, n), pot).unwrap()
}

const SCENARIOS: [ScenarioName; 7] = [
    ScenarioName::Particle1D,
    ScenarioName::PogoStick,
    ScenarioName::SpringSphere,
    ScenarioName::SpringSphereMixed,
    ScenarioName::NonlinearOscillator,
    ScenarioName::NewtonsCradle,
    ScenarioName::LennardJonesChain,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_even_in_momentum(seed in any::<u64>(), n in 1usize..7) {
        let mut r = rng(seed);
        let sys = nonlinear_system(&mut r, n);
        let q = vector(&mut r, n, 2.0);
        let p = vector(&mut r, n, 2.0);
        let h_plus = sys.hamiltonian(&PhaseState::new(q.clone(), p.clone(), 0.0));
        let h_minus = sys.hamiltonian(&PhaseState::new(q, -p, 0.0));
        prop_assert_eq!(h_plus, h_minus);
    }

    #[test]
    fn scenario_gradients_match_finite_differences(seed in any::<u64>(), which in 0usize..7) {
        let sc = build_scenario(&ScenarioSpec::new(SCENARIOS[which])).unwrap();
        let mut r = rng(seed);
        let q = &sc.initial.q + vector(&mut r, sc.system.dim(), 0.05);
        prop_assert!(sc.system.gradient_consistency(&q, 1e-6) <= 1e-5);
    }

    #[test]
    fn rotation_invariant_scenarios_have_no_torque(seed in any::<u64>(), oscillator in any::<bool>()) {
        let name = if oscillator { ScenarioName::NonlinearOscillator } else { ScenarioName::SpringSphere };
        let sc = build_scenario(&ScenarioSpec::new(name)).unwrap();
        let mut r = rng(seed);
        let q = &sc.initial.q + vector(&mut r, 4, 0.5);
        let grad = sc.system.potential_gradient(&q);
        let torque = q[0] * grad[1] - q[1] * grad[0] + q[2] * grad[3] - q[3] * grad[2];
        prop_assert!(torque.abs() <= 1e-10 * grad.amax().max(1.0));
    }

    #[test]
    fn discrete_momenta_match_finite_differences(seed in any::<u64>(), n in 1usize..5, rule in rule()) {
        let mut r = rng(seed);
        let sys = nonlinear_system(&mut r, n);
        let quad = Quadrature::new(rule, 0.1);
        let q0 = vector(&mut r, n, 1.0);
        let q1 = &q0 + vector(&mut r, n, 0.1);
        let fd = |slot: usize| {
            let f = |x: &Vector| if slot == 0 { quad.discrete_lagrangian(&sys, x, &q1) } else { quad.discrete_lagrangian(&sys, &q0, x) };
            gvi::linalg::fd_gradient(&f, if slot == 0 { &q0 } else { &q1 }, 1e-6)
        };
        let rel = |a: &Vector, b: &Vector| (a - b).amax() / b.amax().max(1.0);
        prop_assert!(rel(&fd(0), &quad.d1(&sys, &q0, &q1)) <= 1e-6);
        prop_assert!(rel(&fd(1), &quad.d2(&sys, &q0, &q1)) <= 1e-6);
    }

    #[test]
    fn free_motion_rules_coincide(seed in any::<u64>(), n in 1usize..6) {
        let mut r = rng(seed);
        let sys = MechanicalSystem::new(spd(&mut r, n), Potential::zero(n)).unwrap();
        let q0 = vector(&mut r, n, 1.0);
        let q1 = vector(&mut r, n, 1.0);
        let mid = Quadrature::new(Rule::Midpoint, 0.05);
        let ver = Quadrature::new(Rule::Verlet, 0.05);
        prop_assert!((mid.d1(&sys, &q0, &q1) - ver.d1(&sys, &q0, &q1)).amax() <= 1e-12);
        prop_assert!((mid.d2(&sys, &q0, &q1) - ver.d2(&sys, &q0, &q1)).amax() <= 1e-12);
    }

    #[test]
    fn projected_gradients_are_idempotent(seed in any::<u64>(), n in 2usize..7, k in 1usize..4) {
        prop_assume!(n >= k + 2);
        let mut r = rng(seed);
        let inst = boundary_instance(&mut r, n, k, true);
        let normals = cones::projected_active_gradient(&inst.sys, &inst.q, &IndexSet::all(k));
        let proj = cones::equality_projector(&inst.sys, &inst.q).unwrap();
        prop_assert!((&proj * &normals - &normals).norm() <= 1e-12 * normals.norm().max(1.0));
    }

    #[test]
    fn cone_sets_are_nested(seed in any::<u64>(), n in 1usize..7, k in 1usize..5, shift in any::<bool>()) {
        let mut r = rng(seed);
        let inst = boundary_instance(&mut r, n, k, false);
        let tol = Tolerances::default();
        // either every wall is active or q is moved off (or through) them
        let q = if shift { &inst.q + vector(&mut r, n, 1e-3) } else { inst.q.clone() };
        let active = cones::active_set(&inst.sys, &q, &tol);
        let q_pred = &q + vector(&mut r, n, 0.1);
        prop_assert!(cones::smooth_set(&inst.sys, &q, &inst.p, &tol).is_subset(&active));
        prop_assert!(active.is_subset(&cones::extended_active_set(&inst.sys, &q, &q_pred, &tol)));
    }

    #[test]
    fn reflections_satisfy_jump_conditions(seed in any::<u64>(), n in 1usize..7, k in 1usize..5, eq in any::<bool>()) {
        // more walls than dimensions generically leave no feasible direction
        prop_assume!(k <= n);
        let mut r = rng(seed);
        let eq = eq && n >= k + 2;
        let inst = boundary_instance(&mut r, n, k, eq);
        let tol = Tolerances::default();
        let set = IndexSet::all(k);
        for energy in energies(0.05) {
            let out = generalized_reflection(&inst.sys, &inst.q, &inst.p, &set, energy, &tol).unwrap();
            prop_assert!(out.lambda.iter().all(|&l| l >= 0.0));
            prop_assert!(cones::in_tangent_cone(&inst.sys, &inst.q, &inst.sys.velocity(&out.p_plus), &tol));
            let normals = cones::projected_active_gradient(&inst.sys, &inst.q, &set);
            prop_assert!((&inst.p + &normals * &out.lambda - &out.p_plus).amax() <= 1e-10 * inst.p.amax().max(1.0));
            let e0 = energy.evaluate(&inst.sys, &inst.q, &inst.p).unwrap();
            let e1 = energy.evaluate(&inst.sys, &inst.q, &out.p_plus).unwrap();
            prop_assert!((e1 - e0).abs() <= 1e-9 * e0.abs().max(1.0));
        }
    }

    #[test]
    fn single_constraint_reflection_is_a_mirror(seed in any::<u64>(), n in 1usize..7) {
        let mut r = rng(seed);
        let inst = boundary_instance(&mut r, n, 1, false);
        let tol = Tolerances::default();
        let grad = inst.sys.inequalities()[0].grad(&inst.q);
        let minv = inst.sys.mass_inv();
        let u = grad.dot(&(minv * &inst.p));
        let p = if u < 0.0 { inst.p.clone() } else { -&inst.p };
        let u = -u.abs();
        prop_assume!(u < -1e-6);
        let expected = &p - &grad * (2.0 * u / grad.dot(&(minv * &grad)));
        let set = IndexSet::all(1);
        let g = generalized_reflection(&inst.sys, &inst.q, &p, &set, EnergyFunction::ContinuousH, &tol).unwrap();
        let m = moreau_reflection(&inst.sys, &inst.q, &p, &set, EnergyFunction::ContinuousH, &tol).unwrap();
        prop_assert!((&g.p_plus - &expected).amax() <= 1e-12 * p.amax().max(1.0));
        prop_assert!((&m.p_plus - &expected).amax() <= 1e-12 * p.amax().max(1.0));
    }

    #[test]
    fn reflection_is_rotation_equivariant(seed in any::<u64>(), n in 2usize..6, k in 1usize..4) {
        prop_assume!(k <= n);
        let mut r = rng(seed);
        let c = rand::Rng::random_range(&mut r, 0.5..2.0);
        let q = vector(&mut r, n, 1.0);
        let p = vector(&mut r, n, 1.0);
        let walls: Vec<Vector> = (0..k).map(|_| unit(&mut r, n)).collect();
        let rot = orthogonal(&mut r, n);
        let build = |frame: &Matrix, x: &Vector| {
            let mut sys = MechanicalSystem::new(Matrix::identity(n, n) * c, Potential::zero(n)).unwrap();
            for (i, a) in walls.iter().enumerate() {
                let a = frame * a;
                let b = -a.dot(x);
                sys = sys.with_inequality(Constraint::affine(format!("w{i}"), a, b));
            }
            sys
        };
        let tol = Tolerances::default();
        let set = IndexSet::all(k);
        let base = generalized_reflection(&build(&Matrix::identity(n, n), &q), &q, &p, &set, EnergyFunction::ContinuousH, &tol).unwrap();
        let rq = &rot * &q;
        let turned = generalized_reflection(&build(&rot, &rq), &rq, &(&rot * &p), &set, EnergyFunction::ContinuousH, &tol).unwrap();
        prop_assert!((&rot * &base.p_plus - &turned.p_plus).amax() <= 1e-10 * p.amax().max(1.0));
    }

    #[test]
    fn position_update_is_complementary(seed in any::<u64>(), n in 1usize..6, k in 1usize..4, rule in rule()) {
        prop_assume!(k <= n);
        let mut r = rng(seed);
        let inst = boundary_instance(&mut r, n, k, false);
        let tol = Tolerances::default();
        let set = IndexSet::all(k);
        let quad = Quadrature::new(rule, 0.05);
        let sol = position_update_solve(&inst.sys, quad, &inst.q, &inst.p, &set, &tol).unwrap();
        let g = inst.sys.inequality_values(&sol.q_next);
        prop_assert!(sol.lambda.iter().all(|&l| l >= 0.0));
        prop_assert!(g.iter().all(|&v| v >= -tol.eps_active));
        prop_assert!(sol.lambda.dot(&g).abs() <= tol.eps_solver * sol.lambda.amax().max(1.0));
    }

    #[test]
    fn interior_steps_reduce_to_the_variational_map(seed in any::<u64>(), n in 1usize..6, rule in rule()) {
        let mut r = rng(seed);
        let sys = nonlinear_system(&mut r, n);
        let s = PhaseState::new(vector(&mut r, n, 1.0), vector(&mut r, n, 1.0), 0.0);
        let quad = Quadrature::new(rule, 0.02);
        let cfg = IntegratorConfig::new(Method::Gvi { linearized: false }, quad);
        let tol = cfg.tolerances;
        let q1 = gvi::solvers::forward_predictor(&sys, quad, &s.q, &s.p, &tol).unwrap();
        let p1 = quad.d2(&sys, &s.q, &q1);
        for out in [gvi_step(&sys, &cfg, &s), dsi_step(&sys, &cfg, &s), extended_reflection_step(&sys, &cfg, &s)] {
            let out = out.unwrap();
            prop_assert!((&out.state.q - &q1).amax() <= 1e-12);
            prop_assert!((&out.state.p - &p1).amax() <= 1e-12);
        }
    }
}

#[test]
fn scenarios_start_admissible_and_run_their_default_config() {
    let tol = Tolerances::default();
    for name in SCENARIOS {
        let sc = build_scenario(&ScenarioSpec::new(name)).unwrap();
        let (g, f) = sc.system.constraint_values(&sc.initial.q);
        assert!(g.iter().all(|&v| v >= -tol.eps_active), "{name}");
        assert!(f.iter().all(|v| v.abs() <= tol.eps_active), "{name}");
        let mut stepper = gvi::Stepper::new(&sc.system, sc.config).unwrap();
        let mut s = sc.initial.clone();
        for _ in 0..100 {
            s = stepper.step(&s).unwrap_or_else(|e| panic!("{name}: {e}")).state;
        }
    }
}

#[test]
fn lj_linear_momentum_changes_only_at_the_container() {
    let sc = build_scenario(&ScenarioSpec::new(ScenarioName::LennardJonesChain)).unwrap();
    let sys = &sc.system;
    let container: Vec<usize> = (0..sys.num_inequalities()).filter(|&i| sys.inequalities()[i].name.starts_with("container")).collect();
    let clear = |q: &Vector| container.iter().all(|&i| sys.inequalities()[i].eval(q) > 0.05);
    let mut stepper = gvi::Stepper::new(sys, sc.config).unwrap();
    let mut s = sc.initial.clone();
    let mut reference = momenta(sys, &s).0;
    let mut checked = 0;
    for _ in 0..5000 {
        let next = stepper.step(&s).unwrap().state;
        let now = momenta(sys, &next).0;
        if clear(&s.q) && clear(&next.q) {
            assert!((&now - &reference).amax() <= 1e-8, "drift {:.3e}", (&now - &reference).amax());
            checked += 1;
        } else {
            reference = now;
        }
        s = next;
    }
    assert!(checked > 1000);
}
