//! Benchmark systems with their initial states and recommended integrators.
//!
//! Every scenario accepts numeric overrides for a fixed set of documented
//! parameters; unknown keys are rejected.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::integrators::{IntegratorConfig, Method};
use crate::quadrature::{Quadrature, Rule};
use crate::sysmodel::{Constraint, MechanicalSystem, PhaseState, Potential};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioName {
    Particle1D,
    PogoStick,
    SpringSphere,
    SpringSphereMixed,
    NonlinearOscillator,
    NewtonsCradle,
    LennardJonesChain,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 7] = [
        ScenarioName::Particle1D,
        ScenarioName::PogoStick,
        ScenarioName::SpringSphere,
        ScenarioName::SpringSphereMixed,
        ScenarioName::NonlinearOscillator,
        ScenarioName::NewtonsCradle,
        ScenarioName::LennardJonesChain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Particle1D => "particle1d",
            ScenarioName::PogoStick => "pogo",
            ScenarioName::SpringSphere => "spring-sphere",
            ScenarioName::SpringSphereMixed => "spring-sphere-mixed",
            ScenarioName::NonlinearOscillator => "nonlinear-oscillator",
            ScenarioName::NewtonsCradle => "newtons-cradle",
            ScenarioName::LennardJonesChain => "lj-chain",
        }
    }

    /// Parameters and their defaults.
    pub fn parameters(self) -> &'static [(&'static str, f64)] {
        match self {
            ScenarioName::Particle1D => &[("gravity", 9.8), ("mass", 1.0), ("q0", 1.0), ("p0", 0.0)],
            ScenarioName::PogoStick => &[
                ("gravity", 9.8),
                ("mass", 1.0),
                ("stiffness", 10.0),
                ("rest_length", 5.0),
                ("drop_height", 1.0),
            ],
            ScenarioName::SpringSphere | ScenarioName::SpringSphereMixed => &[
                ("radius", 5.0),
                ("strength", 25.0),
                ("stiffness", 1.0),
                ("rest_length", 2.0 * std::f64::consts::SQRT_2),
            ],
            ScenarioName::NonlinearOscillator => &[("radius", 1.0)],
            ScenarioName::NewtonsCradle => &[
                ("balls", 5.0),
                ("radius", 0.25),
                ("length", 1.0),
                ("gravity", 9.8),
                ("angle", PI / 5.0),
                ("pulled", 2.0),
            ],
            ScenarioName::LennardJonesChain => &[
                ("particles", 6.0),
                ("rod_length", 1.0),
                ("sigma", 0.6),
                ("epsilon", 1.0),
                ("container", 5.0),
                ("momentum_scale", 3.0),
            ],
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = ScenarioError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        let alias = match key.as_str() {
            "particle" | "particle-1d" | "bouncing-particle" => "particle1d",
            "pogo-stick" | "pogostick" => "pogo",
            "nonlinear" | "oscillator" => "nonlinear-oscillator",
            "cradle" | "newton" => "newtons-cradle",
            "lj" | "lennard-jones" | "lennard-jones-chain" => "lj-chain",
            other => other,
        };
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == alias)
            .ok_or_else(|| ScenarioError::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("scenario {scenario} has no parameter '{key}' (known: {known})")]
    UnknownKey { scenario: ScenarioName, key: String, known: String },
    #[error("invalid value {value} for {scenario}.{key}")]
    InvalidValue { scenario: ScenarioName, key: String, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub overrides: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(name: ScenarioName) -> Self {
        Self {
            name,
            overrides: BTreeMap::new(),
            seed: 42,
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.overrides.insert(key.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn params(&self) -> Result<BTreeMap<&'static str, f64>, ScenarioError> {
        let defaults = self.name.parameters();
        let mut out: BTreeMap<&'static str, f64> = defaults.iter().copied().collect();
        for (k, &v) in &self.overrides {
            let Some(&(key, _)) = defaults.iter().find(|(d, _)| d == k) else {
                return Err(ScenarioError::UnknownKey {
                    scenario: self.name,
                    key: k.clone(),
                    known: defaults.iter().map(|(d, _)| *d).collect::<Vec<_>>().join(", "),
                });
            };
            if !v.is_finite() {
                return Err(ScenarioError::InvalidValue {
                    scenario: self.name,
                    key: k.clone(),
                    value: v,
                });
            }
            out.insert(key, v);
        }
        Ok(out)
    }
}

/// A ready-to-run experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: ScenarioName,
    pub system: MechanicalSystem,
    pub initial: PhaseState,
    pub config: IntegratorConfig,
}

fn block(q: &Vector, i: usize, b: usize) -> Vector {
    q.rows(i * b, b).into_owned()
}

/// Value, gradient and Hessian of `phi(|d|)` with respect to `d`, given
/// `phi`, `phi'` and `phi''` at `r = |d|`.
pub fn radial(d: &Vector, phi: impl Fn(f64) -> (f64, f64, f64)) -> (f64, Vector, Matrix) {
    let r = d.norm();
    let (v, dv, ddv) = phi(r);
    let u = d / r;
    let uu = &u * u.transpose();
    let b = d.len();
    let hess = &uu * ddv + (Matrix::identity(b, b) - &uu) * (dv / r);
    (v, u * dv, hess)
}

/// Value, gradient and Hessian of `psi(|d|^2)` with respect to `d`, given
/// `psi`, `psi'` and `psi''` at `s = |d|^2`. Smooth at `d = 0`.
pub fn squared_radial(d: &Vector, psi: impl Fn(f64) -> (f64, f64, f64)) -> (f64, Vector, Matrix) {
    let s = d.norm_squared();
    let (v, dv, ddv) = psi(s);
    let b = d.len();
    let hess = Matrix::identity(b, b) * (2.0 * dv) + d * d.transpose() * (4.0 * ddv);
    (v, d * (2.0 * dv), hess)
}

/// Adds a term depending on one particle block to running sums.
fn add_single(acc: &mut (f64, Vector, Matrix), i: usize, b: usize, term: (f64, Vector, Matrix)) {
    acc.0 += term.0;
    let mut g = acc.1.rows_mut(i * b, b);
    g += &term.1;
    let mut h = acc.2.view_mut((i * b, i * b), (b, b));
    h += &term.2;
}

/// Adds a term depending on `q_i - q_j`.
fn add_pair(acc: &mut (f64, Vector, Matrix), i: usize, j: usize, b: usize, term: (f64, Vector, Matrix)) {
    acc.0 += term.0;
    {
        let mut g = acc.1.rows_mut(i * b, b);
        g += &term.1;
    }
    {
        let mut g = acc.1.rows_mut(j * b, b);
        g -= &term.1;
    }
    for (a, c, sign) in [(i, i, 1.0), (j, j, 1.0), (i, j, -1.0), (j, i, -1.0)] {
        let mut h = acc.2.view_mut((a * b, c * b), (b, b));
        h += &term.2 * sign;
    }
}

/// Builds a potential from a closure producing value, gradient and Hessian.
fn potential_from(n: usize, f: impl Fn(&Vector, &mut (f64, Vector, Matrix)) + Send + Sync + Clone + 'static) -> Potential {
    let eval = move |q: &Vector| {
        let mut acc = (0.0, Vector::zeros(n), Matrix::zeros(n, n));
        f(q, &mut acc);
        acc
    };
    let (e1, e2, e3) = (eval.clone(), eval.clone(), eval);
    Potential::new(move |q| e1(q).0, move |q| e2(q).1).with_hessian(move |q| e3(q).2)
}

/// `sign * (|q_i - q_j| - offset)` as a constraint with Hessian.
fn pair_distance(name: String, n: usize, b: usize, i: usize, j: usize, offset: f64) -> Constraint {
    let eval = move |q: &Vector| {
        let d = block(q, i, b) - block(q, j, b);
        let mut acc = (0.0, Vector::zeros(n), Matrix::zeros(n, n));
        add_pair(&mut acc, i, j, b, radial(&d, |r| (r, 1.0, 0.0)));
        acc.0 -= offset;
        acc
    };
    let (e1, e2, e3) = (eval, eval, eval);
    Constraint::new(name, move |q| e1(q).0, move |q| e2(q).1).with_hessian(move |q| e3(q).2)
}

/// `sign * (|q_i - anchor| - offset)` as a constraint with Hessian.
fn anchor_distance(name: String, n: usize, b: usize, i: usize, anchor: Vector, offset: f64, sign: f64) -> Constraint {
    let eval = move |q: &Vector| {
        let d = block(q, i, b) - &anchor;
        let mut acc = (0.0, Vector::zeros(n), Matrix::zeros(n, n));
        add_single(&mut acc, i, b, radial(&d, |r| (r, 1.0, 0.0)));
        acc.0 -= offset;
        (acc.0 * sign, acc.1 * sign, acc.2 * sign)
    };
    let (e1, e2, e3) = (eval.clone(), eval.clone(), eval);
    Constraint::new(name, move |q| e1(q).0, move |q| e2(q).1).with_hessian(move |q| e3(q).2)
}

fn count(p: &BTreeMap<&str, f64>, key: &str, scenario: ScenarioName, min: usize) -> Result<usize, ScenarioError> {
    let v = p[key];
    if v.fract() != 0.0 || v < min as f64 {
        return Err(ScenarioError::InvalidValue {
            scenario,
            key: key.to_string(),
            value: v,
        });
    }
    Ok(v as usize)
}

fn positive(p: &BTreeMap<&str, f64>, key: &str, scenario: ScenarioName) -> Result<f64, ScenarioError> {
    let v = p[key];
    if v > 0.0 {
        Ok(v)
    } else {
        Err(ScenarioError::InvalidValue {
            scenario,
            key: key.to_string(),
            value: v,
        })
    }
}

fn config(method: Method, rule: Rule, h: f64) -> IntegratorConfig {
    IntegratorConfig::new(method, Quadrature::new(rule, h))
}

const GVI: Method = Method::Gvi { linearized: false };

pub fn build_scenario(spec: &ScenarioSpec) -> Result<Scenario, ScenarioError> {
    let p = spec.params()?;
    let name = spec.name;
    let (system, initial, config) = match name {
        ScenarioName::Particle1D => {
            let m = positive(&p, "mass", name)?;
            let sys = MechanicalSystem::new(Matrix::from_element(1, 1, m), Potential::linear(Vector::from_element(1, m * p["gravity"])))
                .expect("positive scalar mass")
                .with_inequality(Constraint::affine("ground", Vector::from_element(1, 1.0), 0.0));
            let s0 = PhaseState::new(Vector::from_element(1, p["q0"]), Vector::from_element(1, p["p0"]), 0.0);
            (sys, s0, config(GVI, Rule::Verlet, 1e-2))
        }
        ScenarioName::PogoStick => {
            let (g, m, k, l) = (p["gravity"], positive(&p, "mass", name)?, p["stiffness"], p["rest_length"]);
            let stiff = Matrix::from_row_slice(2, 2, &[k, -k, -k, k]);
            let lin = Vector::from_vec(vec![m * g - k * l, m * g + k * l]);
            let offset = 0.5 * k * l * l;
            let quad = Potential::quadratic(stiff, lin);
            let (v, gr, hs) = (quad.value.clone(), quad.gradient.clone(), quad.hessian.clone().expect("quadratic has Hessian"));
            let pot = Potential::new(move |q| v(q) + offset, move |q| gr(q)).with_hessian(move |q| hs(q));
            let sys = MechanicalSystem::new(Matrix::identity(2, 2) * m, pot)
                .expect("positive mass")
                .with_inequality(Constraint::affine("ground", Vector::from_vec(vec![0.0, 1.0]), 0.0));
            let h0 = p["drop_height"];
            let s0 = PhaseState::new(Vector::from_vec(vec![h0 + l, h0]), Vector::zeros(2), 0.0);
            (sys, s0, config(Method::ExtendedReflection, Rule::Verlet, 0.1))
        }
        ScenarioName::SpringSphere | ScenarioName::SpringSphereMixed => {
            let (r, a, k, l) = (positive(&p, "radius", name)?, p["strength"], p["stiffness"], p["rest_length"]);
            let pot = potential_from(4, move |q, acc| {
                for i in 0..2 {
                    let term = squared_radial(&block(q, i, 2), |s| (a / s, -a / (s * s), 2.0 * a / (s * s * s)));
                    add_single(acc, i, 2, term);
                }
                let d = block(q, 0, 2) - block(q, 1, 2);
                add_pair(acc, 0, 1, 2, radial(&d, |x| (0.5 * k * (x - l) * (x - l), k * (x - l), k)));
            });
            let mut sys = MechanicalSystem::unit_mass(4, pot).expect("unit mass").with_particle_block(2);
            for i in 0..2 {
                sys = sys.with_inequality(anchor_distance(format!("sphere{i}"), 4, 2, i, Vector::zeros(2), r, -1.0));
            }
            let s0 = if name == ScenarioName::SpringSphere {
                PhaseState::new(
                    Vector::from_vec(vec![4.0, -3.0, 3.0, -4.0]),
                    Vector::from_vec(vec![3.0 / 5.0, 4.0 / 5.0, 4.0 / 5.0, 3.0 / 5.0]),
                    0.0,
                )
            } else {
                let c = 17f64.sqrt();
                PhaseState::new(
                    Vector::from_vec(vec![4.0, -1.0, 3.0, -4.0]),
                    Vector::from_vec(vec![1.0 / c, 4.0 / c, 4.0 / 5.0, 3.0 / 5.0]),
                    0.0,
                )
            };
            (sys, s0, config(GVI, Rule::Midpoint, 0.5))
        }
        ScenarioName::NonlinearOscillator => {
            let r = positive(&p, "radius", name)?;
            let pot = potential_from(4, |q, acc| {
                for i in 0..2 {
                    let term = squared_radial(&block(q, i, 2), |s| (s * (s - 1.0) * (s - 1.0), (s - 1.0) * (3.0 * s - 1.0), 6.0 * s - 4.0));
                    add_single(acc, i, 2, term);
                }
            });
            let sys = MechanicalSystem::unit_mass(4, pot)
                .expect("unit mass")
                .with_particle_block(2)
                .with_inequality(pair_distance("contact".into(), 4, 2, 0, 1, 2.0 * r));
            let s0 = PhaseState::new(
                Vector::from_vec(vec![0.0, -1.4, 0.0, 1.4]),
                Vector::from_vec(vec![1.0, 0.0, -1.0, 0.0]),
                0.0,
            );
            (sys, s0, config(GVI, Rule::Midpoint, 0.1))
        }
        ScenarioName::NewtonsCradle => {
            let balls = count(&p, "balls", name, 2)?;
            let (r, l, g) = (positive(&p, "radius", name)?, positive(&p, "length", name)?, p["gravity"]);
            let pulled = count(&p, "pulled", name, 0)?.min(balls);
            let theta = -p["angle"];
            let n = 2 * balls;
            let lin = Vector::from_fn(n, |k, _| if k % 2 == 1 { g } else { 0.0 });
            let mut sys = MechanicalSystem::unit_mass(n, Potential::linear(lin)).expect("unit mass").with_particle_block(2);
            let anchors: Vec<Vector> = (0..balls).map(|i| Vector::from_vec(vec![2.0 * r * i as f64, 0.0])).collect();
            for (i, a) in anchors.iter().enumerate() {
                sys = sys.with_equality(anchor_distance(format!("string{i}"), n, 2, i, a.clone(), l, 1.0));
            }
            for i in 0..balls - 1 {
                sys = sys.with_inequality(pair_distance(format!("contact{i}"), n, 2, i, i + 1, 2.0 * r));
            }
            let mut q = Vector::zeros(n);
            for (i, a) in anchors.iter().enumerate() {
                let angle = if i < pulled { theta } else { 0.0 };
                q[2 * i] = a[0] + l * angle.sin();
                q[2 * i + 1] = a[1] - l * angle.cos();
            }
            (sys, PhaseState::new(q, Vector::zeros(n), 0.0), config(GVI, Rule::Midpoint, 1e-2))
        }
        ScenarioName::LennardJonesChain => {
            let np = count(&p, "particles", name, 2)?;
            let (rod, sigma, eps, rb) = (
                positive(&p, "rod_length", name)?,
                positive(&p, "sigma", name)?,
                p["epsilon"],
                positive(&p, "container", name)?,
            );
            let radius = 0.5 * sigma;
            let n = 3 * np;
            let lj = move |x: f64| {
                let s6 = (sigma / x).powi(6);
                let s12 = s6 * s6;
                (
                    4.0 * eps * (s12 - s6),
                    4.0 * eps * (-12.0 * s12 + 6.0 * s6) / x,
                    4.0 * eps * (156.0 * s12 - 42.0 * s6) / (x * x),
                )
            };
            let pot = potential_from(n, move |q, acc| {
                // every ordered pair i != j
                for i in 0..np {
                    for j in 0..np {
                        if i != j {
                            let d = block(q, i, 3) - block(q, j, 3);
                            add_pair(acc, i, j, 3, radial(&d, lj));
                        }
                    }
                }
            });
            let mut sys = MechanicalSystem::unit_mass(n, pot).expect("unit mass").with_particle_block(3);
            for i in 0..np - 1 {
                sys = sys.with_equality(pair_distance(format!("rod{i}"), n, 3, i, i + 1, rod));
            }
            for i in 0..np {
                for j in i + 1..np {
                    sys = sys.with_inequality(pair_distance(format!("overlap{i}-{j}"), n, 3, i, j, 2.0 * radius));
                }
            }
            for i in 0..np {
                sys = sys.with_inequality(anchor_distance(format!("container{i}"), n, 3, i, Vector::zeros(3), rb - radius, -1.0));
            }
            let mut q = Vector::zeros(n);
            let centre = 0.5 * (np as f64 - 1.0) * rod;
            for i in 0..np {
                q[3 * i] = i as f64 * rod - centre;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let scale = p["momentum_scale"];
            let mut mom = Vector::zeros(n);
            for i in 0..np {
                mom[3 * i + 1] = scale * rng.random_range(-1.0..1.0);
                mom[3 * i + 2] = scale * rng.random_range(-1.0..1.0);
            }
            let proj = crate::cones::equality_projector(&sys, &q).expect("rods are equalities");
            let mom = proj * mom;
            (sys, PhaseState::new(q, mom, 0.0), config(GVI, Rule::Verlet, 1e-2))
        }
    };
    Ok(Scenario {
        name,
        system,
        initial,
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(name: ScenarioName) -> Scenario {
        build_scenario(&ScenarioSpec::new(name)).unwrap()
    }

    #[test]
    fn particle_defaults() {
        let s = build(ScenarioName::Particle1D);
        assert_eq!(s.system.hamiltonian(&s.initial), 9.8);
        assert_eq!(s.system.inequality_values(&Vector::from_element(1, 0.25))[0], 0.25);
    }

    #[test]
    fn pogo_initial_energy() {
        let s = build(ScenarioName::PogoStick);
        assert!((s.system.hamiltonian(&s.initial) - 68.6).abs() < 1e-12);
    }

    #[test]
    fn spring_sphere_initial_energy_and_boundary() {
        let s = build(ScenarioName::SpringSphere);
        assert!((s.system.hamiltonian(&s.initial) - 4.0).abs() < 1e-12);
        let g = s.system.inequality_values(&s.initial.q);
        assert!(g.amax() < 1e-12);
    }

    #[test]
    fn oscillator_contact_gap() {
        let s = build(ScenarioName::NonlinearOscillator);
        assert!((s.system.inequality_values(&s.initial.q)[0] - 0.8).abs() < 1e-12);
        let grad = s.system.inequalities()[0].grad(&s.initial.q);
        assert!((grad - Vector::from_vec(vec![0.0, -1.0, 0.0, 1.0])).amax() < 1e-15);
    }

    #[test]
    fn cradle_constraint_counts() {
        let s = build(ScenarioName::NewtonsCradle);
        assert_eq!(s.system.num_equalities(), 5);
        assert_eq!(s.system.num_inequalities(), 4);
        assert!(s.system.equality_values(&s.initial.q).amax() < 1e-15);
        assert!(s.system.inequality_values(&s.initial.q).min() > -1e-12);
    }

    #[test]
    fn lj_chain_layout() {
        let s = build(ScenarioName::LennardJonesChain);
        assert_eq!(s.system.dim(), 18);
        assert_eq!(s.system.num_equalities(), 5);
        assert_eq!(s.system.num_inequalities(), 21);
        assert!(s.system.equality_values(&s.initial.q).amax() < 1e-12);
        let f = s.system.equality_gradients(&s.initial.q);
        assert!((f.transpose() * &s.initial.p).amax() < 1e-12);
    }

    #[test]
    fn unknown_override_is_rejected() {
        let spec = ScenarioSpec::new(ScenarioName::Particle1D).with("stiffness", 3.0);
        assert!(matches!(build_scenario(&spec), Err(ScenarioError::UnknownKey { .. })));
        let spec = ScenarioSpec::new(ScenarioName::Particle1D).with("q0", 1.1);
        assert_eq!(build_scenario(&spec).unwrap().initial.q[0], 1.1);
    }

    #[test]
    fn names_round_trip() {
        for n in ScenarioName::ALL {
            assert_eq!(n.as_str().parse::<ScenarioName>().unwrap(), n);
        }
        assert_eq!("pogo-stick".parse::<ScenarioName>().unwrap(), ScenarioName::PogoStick);
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        for n in ScenarioName::ALL {
            let s = build(n);
            let q = &s.initial.q + Vector::from_fn(s.system.dim(), |i, _| 0.01 * ((i as f64) * 0.7).sin());
            assert!(s.system.gradient_consistency(&q, 1e-6) < 1e-5, "{n}");
            let fd = crate::linalg::fd_hessian(&|x: &Vector| s.system.potential_gradient(x), &q, 1e-6);
            let an = s.system.potential_hessian(&q).unwrap();
            assert!((fd - &an).amax() <= 1e-5 * an.amax().max(1.0), "{n}");
        }
    }
}
