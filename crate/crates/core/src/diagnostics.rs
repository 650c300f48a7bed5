//! Per-step measurements and run traces.
//!
//! A [`Trace`] stores decimated records for output, while its running
//! accumulators see every step, so drift and envelope statistics never depend
//! on the decimation factor.

use std::fmt;

use crate::error::IntegratorError;
use crate::integrators::{IntegratorConfig, Stepper};
use crate::quadrature::{modified_hamiltonian_verlet, Rule};
use crate::sysmodel::{MechanicalSystem, PhaseState};
use crate::Vector;

/// What happened during the step that produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Event {
    #[default]
    None,
    Reflection,
    SmoothContact,
    StepFailure,
}

impl Event {
    pub fn code(self) -> u8 {
        match self {
            Event::None => 0,
            Event::Reflection => 1,
            Event::SmoothContact => 2,
            Event::StepFailure => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Event::None),
            1 => Some(Event::Reflection),
            2 => Some(Event::SmoothContact),
            3 => Some(Event::StepFailure),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub hamiltonian: f64,
    pub modified_hamiltonian: Option<f64>,
    /// Sum of the momentum blocks of all particles.
    pub linear_momentum: Vector,
    /// `sum q_i x p_i` about the origin: one component in the plane, three in
    /// space, none on the line.
    pub angular_momentum: Vector,
    /// Most negative inequality value (`+inf` without inequalities).
    pub g_min: f64,
    /// Largest equality residual magnitude.
    pub f_max_abs: f64,
    pub lambda_active: Vector,
    pub event: Event,
}

impl DiagnosticRecord {
    /// Scalar angular momentum: the planar component, the magnitude in 3D, or
    /// zero for one-dimensional particles.
    pub fn angular_scalar(&self) -> f64 {
        match self.angular_momentum.len() {
            1 => self.angular_momentum[0],
            3 => self.angular_momentum.norm(),
            _ => 0.0,
        }
    }
}

/// Linear and angular momentum about the origin.
pub fn momenta(sys: &MechanicalSystem, s: &PhaseState) -> (Vector, Vector) {
    let b = sys.particle_block();
    let count = sys.dim() / b;
    let mut lin = Vector::zeros(b);
    for i in 0..count {
        lin += s.p.rows(i * b, b);
    }
    let ang = match b {
        2 => {
            let mut j = 0.0;
            for i in 0..count {
                j += s.q[2 * i] * s.p[2 * i + 1] - s.q[2 * i + 1] * s.p[2 * i];
            }
            Vector::from_element(1, j)
        }
        3 => {
            let mut j = nalgebra::Vector3::zeros();
            for i in 0..count {
                let q = nalgebra::Vector3::new(s.q[3 * i], s.q[3 * i + 1], s.q[3 * i + 2]);
                let p = nalgebra::Vector3::new(s.p[3 * i], s.p[3 * i + 1], s.p[3 * i + 2]);
                j += q.cross(&p);
            }
            Vector::from_column_slice(j.as_slice())
        }
        _ => Vector::zeros(0),
    };
    (lin, ang)
}

/// Measures a state. `modified_step` is the Verlet step whose shadow
/// Hamiltonian should be reported, if any.
pub fn record(sys: &MechanicalSystem, s: &PhaseState, event: Event, modified_step: Option<f64>) -> DiagnosticRecord {
    let (linear_momentum, angular_momentum) = momenta(sys, s);
    let g = sys.inequality_values(&s.q);
    let f = sys.equality_values(&s.q);
    DiagnosticRecord {
        t: s.t,
        hamiltonian: sys.hamiltonian(s),
        modified_hamiltonian: modified_step.and_then(|h| modified_hamiltonian_verlet(sys, s, h).ok()),
        linear_momentum,
        angular_momentum,
        g_min: if g.is_empty() { f64::INFINITY } else { g.min() },
        f_max_abs: if f.is_empty() { 0.0 } else { f.amax() },
        lambda_active: Vector::zeros(0),
        event,
    }
}

/// Drift and envelope of a scalar series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeStats {
    /// `max |x(t) - x(0)|`.
    pub max_drift: f64,
    pub mean: f64,
    /// `(max - min) / |mean|`, or `max - min` when `relative` is false.
    pub envelope: f64,
    /// False when the mean is zero and the envelope is absolute.
    pub relative: bool,
}

/// Running statistics of a scalar series, updated one sample at a time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accumulator {
    pub first: f64,
    pub min: f64,
    pub max: f64,
    pub sum: f64,
    pub count: usize,
    pub max_drift: f64,
}

impl Default for Accumulator {
    fn default() -> Self {
        Self {
            first: f64::NAN,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            sum: 0.0,
            count: 0,
            max_drift: 0.0,
        }
    }
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        if self.count == 0 {
            self.first = x;
        }
        self.min = self.min.min(x);
        self.max = self.max.max(x);
        self.sum += x;
        self.count += 1;
        self.max_drift = self.max_drift.max((x - self.first).abs());
    }

    pub fn stats(&self) -> EnvelopeStats {
        let mean = if self.count == 0 { f64::NAN } else { self.sum / self.count as f64 };
        let spread = self.max - self.min;
        let relative = mean != 0.0;
        EnvelopeStats {
            max_drift: self.max_drift,
            mean,
            envelope: if relative { spread / mean.abs() } else { spread },
            relative,
        }
    }
}

/// `envelope_stats` over an explicit series. Panics on an empty series.
pub fn envelope_stats(series: &[f64]) -> EnvelopeStats {
    assert!(!series.is_empty(), "envelope of an empty series");
    let mut acc = Accumulator::default();
    series.iter().for_each(|&x| acc.push(x));
    acc.stats()
}

/// Quantities available for envelope statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Hamiltonian,
    ModifiedHamiltonian,
    AngularMomentum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub scenario: String,
    pub method: String,
    pub h: f64,
    pub seed: u64,
}

/// The reason a run stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub t: f64,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step failure at t = {}: {}", self.t, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub meta: TraceMeta,
    pub states: Vec<PhaseState>,
    pub records: Vec<DiagnosticRecord>,
    pub hamiltonian: Accumulator,
    pub modified_hamiltonian: Accumulator,
    pub angular_momentum: Accumulator,
    /// Smallest inequality value seen on any step.
    pub g_min: f64,
    /// Largest equality residual seen on any step.
    pub f_max_abs: f64,
    pub steps: usize,
    pub failure: Option<Failure>,
}

impl Trace {
    pub fn new(meta: TraceMeta) -> Self {
        Self {
            meta,
            states: Vec::new(),
            records: Vec::new(),
            hamiltonian: Accumulator::default(),
            modified_hamiltonian: Accumulator::default(),
            angular_momentum: Accumulator::default(),
            g_min: f64::INFINITY,
            f_max_abs: 0.0,
            steps: 0,
            failure: None,
        }
    }

    /// Feeds the accumulators; stores the pair only when `keep` is set.
    pub fn push(&mut self, s: PhaseState, r: DiagnosticRecord, keep: bool) {
        self.hamiltonian.push(r.hamiltonian);
        if let Some(h) = r.modified_hamiltonian {
            self.modified_hamiltonian.push(h);
        }
        self.angular_momentum.push(r.angular_scalar());
        self.g_min = self.g_min.min(r.g_min);
        self.f_max_abs = self.f_max_abs.max(r.f_max_abs);
        if keep {
            self.states.push(s);
            self.records.push(r);
        }
    }

    pub fn stats(&self, quantity: Quantity) -> EnvelopeStats {
        match quantity {
            Quantity::Hamiltonian => self.hamiltonian.stats(),
            Quantity::ModifiedHamiltonian => self.modified_hamiltonian.stats(),
            Quantity::AngularMomentum => self.angular_momentum.stats(),
        }
    }

    /// Statistics over the stored (possibly decimated) records only.
    pub fn stored_stats(&self, quantity: Quantity) -> EnvelopeStats {
        let series: Vec<f64> = self
            .records
            .iter()
            .filter_map(|r| match quantity {
                Quantity::Hamiltonian => Some(r.hamiltonian),
                Quantity::ModifiedHamiltonian => r.modified_hamiltonian,
                Quantity::AngularMomentum => Some(r.angular_scalar()),
            })
            .collect();
        envelope_stats(&series)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Keep every `decimate`-th step (the initial state and the final or
    /// failing step are always kept).
    pub decimate: usize,
    /// A step fails when `|H| > blowup_factor * max(1, |H(0)|)`.
    pub blowup_factor: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            decimate: 1,
            blowup_factor: 1e3,
        }
    }
}

/// Number of fixed steps covering `duration`.
pub fn step_count(duration: f64, h: f64) -> usize {
    (duration / h).round() as usize
}

/// Runs `cfg` from `s0` for `duration` time units with fixed steps.
///
/// Errors only on an invalid configuration; step failures end the run and
/// are reported in [`Trace::failure`] together with a final
/// [`Event::StepFailure`] record.
pub fn simulate(
    sys: &MechanicalSystem,
    cfg: &IntegratorConfig,
    s0: &PhaseState,
    duration: f64,
    meta: TraceMeta,
    opts: SimOptions,
) -> Result<Trace, IntegratorError> {
    let mut stepper = Stepper::new(sys, *cfg)?;
    let h = cfg.h();
    let modified_step = (cfg.quadrature.rule == Rule::Verlet && sys.potential().hessian.is_some()).then_some(h);
    let decimate = opts.decimate.max(1);
    let n = step_count(duration, h);
    let mut trace = Trace::new(meta);
    let mut s = s0.clone();
    let r0 = record(sys, &s, Event::None, modified_step);
    let h0 = r0.hamiltonian;
    let limit = opts.blowup_factor * h0.abs().max(1.0);
    trace.push(s.clone(), r0, true);

    for k in 1..=n {
        let t = s0.t + k as f64 * h;
        let result = stepper.step(&s).and_then(|out| {
            let e = sys.hamiltonian(&out.state);
            if !out.state.is_finite() || !e.is_finite() {
                Err(IntegratorError::NonFinite)
            } else if e.abs() > limit {
                Err(IntegratorError::BlowUp { energy: e })
            } else {
                Ok(out)
            }
        });
        match result {
            Ok(out) => {
                let mut next = out.state;
                next.t = t;
                let mut r = record(sys, &next, out.event, modified_step);
                r.lambda_active = if out.impulse.is_empty() { out.force } else { out.impulse };
                trace.steps = k;
                let keep = k % decimate == 0 || k == n;
                trace.push(next.clone(), r, keep);
                s = next;
            }
            Err(e) => {
                let mut failed = s.clone();
                failed.t = t;
                let mut r = record(sys, &failed, Event::StepFailure, modified_step);
                r.t = t;
                trace.records.push(r);
                trace.states.push(failed);
                trace.failure = Some(Failure { t, message: e.to_string() });
                break;
            }
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{build_scenario, ScenarioName, ScenarioSpec};

    #[test]
    fn envelope_examples() {
        let s = envelope_stats(&[2.0, 2.0, 2.0]);
        assert_eq!((s.max_drift, s.mean, s.envelope), (0.0, 2.0, 0.0));
        let s = envelope_stats(&[1.0, 1.1, 0.9]);
        assert!((s.max_drift - 0.1).abs() < 1e-15);
        assert!((s.mean - 1.0).abs() < 1e-15);
        assert!((s.envelope - 0.2).abs() < 1e-15);
        let s = envelope_stats(&[-1.0, 1.0]);
        assert!(!s.relative && s.envelope == 2.0);
    }

    #[test]
    fn event_codes_round_trip() {
        for e in [Event::None, Event::Reflection, Event::SmoothContact, Event::StepFailure] {
            assert_eq!(Event::from_code(e.code()), Some(e));
        }
        assert_eq!(Event::from_code(9), None);
    }

    #[test]
    fn records_of_initial_states() {
        let p = build_scenario(&ScenarioSpec::new(ScenarioName::Particle1D)).unwrap();
        let r = record(&p.system, &p.initial, Event::None, None);
        assert_eq!(r.hamiltonian, 9.8);
        assert_eq!(r.g_min, 1.0);
        assert_eq!(r.angular_scalar(), 0.0);
        let o = build_scenario(&ScenarioSpec::new(ScenarioName::NonlinearOscillator)).unwrap();
        let r = record(&o.system, &o.initial, Event::None, None);
        assert!((r.angular_scalar() - 2.8).abs() < 1e-15);
    }

    #[test]
    fn decimation_does_not_change_statistics() {
        let p = build_scenario(&ScenarioSpec::new(ScenarioName::Particle1D)).unwrap();
        let meta = TraceMeta {
            scenario: "particle1d".into(),
            method: "gvi".into(),
            h: 1e-2,
            seed: 0,
        };
        let full = simulate(&p.system, &p.config, &p.initial, 2.0, meta.clone(), SimOptions::default()).unwrap();
        let dec = simulate(&p.system, &p.config, &p.initial, 2.0, meta, SimOptions { decimate: 7, ..Default::default() }).unwrap();
        assert_eq!(full.records.len(), 201);
        assert!(dec.records.len() < 40);
        assert_eq!(full.stats(Quantity::Hamiltonian), dec.stats(Quantity::Hamiltonian));
        assert_eq!(dec.records.last().unwrap().t, 2.0);
    }
}
