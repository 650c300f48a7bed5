//! Command-line front end: run configuration, CSV traces and summaries.
//!
//! A run combines one scenario with one or more methods. Settings come from
//! an optional INI-style file and are overridden by flags:
//!
//! ```text
//! scenario = pogo
//! method = collision, extended-reflection
//! h = 0.1
//! duration = 1000
//!
//! [scenario]
//! drop_height = 1.5
//!
//! [tol]
//! eps_active = 1e-9
//!
//! [method.collision]
//! energy = verlet-numerical
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::cones::Tolerances;
use crate::diagnostics::{simulate, EnvelopeStats, Event, Quantity, SimOptions, Trace, TraceMeta};
use crate::integrators::{IntegratorConfig, Method};
use crate::quadrature::Rule;
use crate::reflection::{EnergyFunction, ReflectionKind};
use crate::scenarios::{build_scenario, ScenarioName, ScenarioSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_STEP_FAILURE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A method name plus its per-method settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub name: String,
    pub settings: BTreeMap<String, String>,
}

impl MethodSpec {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.trim().to_ascii_lowercase(),
            settings: BTreeMap::new(),
        }
    }

    /// Resolves the method against the scenario's recommended configuration
    /// and the run's step size.
    pub fn resolve(&self, base: &IntegratorConfig, h: f64, tol: Tolerances) -> Result<IntegratorConfig, CliError> {
        let (stem, rule) = split_rule(&self.name);
        let method = match stem {
            "gvi" => Method::Gvi { linearized: false },
            "gvi-linearized" => Method::Gvi { linearized: true },
            "dsi" => Method::Dsi,
            "extended-reflection" => Method::ExtendedReflection,
            "collision" => Method::Collision,
            "direct-midpoint" => Method::DirectMidpoint { alpha: 0.5 },
            "direct-endpoint" => Method::DirectMidpoint { alpha: 1.0 },
            "newmark" => Method::Newmark {
                beta: 0.25,
                gamma: 0.5,
                imex: false,
            },
            "newmark-imex" => Method::Newmark {
                beta: 0.25,
                gamma: 0.5,
                imex: true,
            },
            other => return Err(usage(format!("unknown method '{other}'"))),
        };
        let mut cfg = base.with_method(method).with_step(h);
        cfg.energy = EnergyFunction::ContinuousH;
        cfg.reflection = ReflectionKind::Generalized;
        cfg.tolerances = tol;
        if let Some(rule) = rule {
            cfg.quadrature.rule = rule;
        }
        for (key, value) in &self.settings {
            let bad = || usage(format!("invalid value '{value}' for {}.{key}", self.name));
            let num = || value.parse::<f64>().map_err(|_| bad());
            match key.as_str() {
                "rule" => {
                    cfg.quadrature.rule = match value.as_str() {
                        "midpoint" => Rule::Midpoint,
                        "verlet" => Rule::Verlet,
                        _ => return Err(bad()),
                    }
                }
                "energy" => {
                    cfg.energy = match value.as_str() {
                        "continuous" | "h" => EnergyFunction::ContinuousH,
                        "verlet-numerical" | "numerical" | "modified" => EnergyFunction::VerletNumericalH { h },
                        _ => return Err(bad()),
                    }
                }
                "reflection" => {
                    cfg.reflection = match value.as_str() {
                        "generalized" => ReflectionKind::Generalized,
                        "moreau" => ReflectionKind::Moreau,
                        _ => return Err(bad()),
                    }
                }
                "alpha" => match &mut cfg.method {
                    Method::DirectMidpoint { alpha } => *alpha = num()?,
                    _ => return Err(usage(format!("{} has no parameter alpha", self.name))),
                },
                "beta" | "gamma" => match &mut cfg.method {
                    Method::Newmark { beta, gamma, .. } => {
                        let v = num()?;
                        if key == "beta" {
                            *beta = v;
                        } else {
                            *gamma = v;
                        }
                    }
                    _ => return Err(usage(format!("{} has no parameter {key}", self.name))),
                },
                _ => return Err(usage(format!("unknown setting {}.{key}", self.name))),
            }
        }
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

fn split_rule(name: &str) -> (&str, Option<Rule>) {
    if let Some(stem) = name.strip_suffix("-verlet") {
        (stem, Some(Rule::Verlet))
    } else if let Some(stem) = name.strip_suffix("-midpoint").filter(|s| *s != "direct") {
        (stem, Some(Rule::Midpoint))
    } else {
        (name, None)
    }
}

/// Everything needed to execute a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    pub methods: Vec<MethodSpec>,
    /// Step size; the scenario's recommendation when absent.
    pub h: Option<f64>,
    pub duration: f64,
    pub out: PathBuf,
    pub decimate: usize,
    pub tolerances: Tolerances,
}

/// Raw settings gathered from a config file and flags before validation.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub scenario: Option<String>,
    pub methods: Vec<String>,
    pub h: Option<f64>,
    pub duration: Option<f64>,
    pub out: Option<PathBuf>,
    pub decimate: Option<usize>,
    pub seed: Option<u64>,
    /// `key=value` pairs: scenario overrides or `method.key` settings.
    pub sets: Vec<(String, String)>,
    pub tols: Vec<(String, String)>,
}

fn parse_num<T: std::str::FromStr>(what: &str, v: &str) -> Result<T, String> {
    v.trim().parse::<T>().map_err(|_| format!("invalid {what} '{v}'"))
}

impl RawConfig {
    /// Parses an INI-style config file.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        let mut section = String::new();
        for (ln, line) in text.lines().enumerate() {
            let err = |message: String| CliError::Parse {
                path: path.to_path_buf(),
                line: ln + 1,
                message,
            };
            let line = line.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(inner) = line.strip_prefix('[') {
                let name = inner.strip_suffix(']').ok_or_else(|| err("unterminated section header".into()))?;
                section = name.trim().to_ascii_lowercase();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got '{line}'")))?;
            let (key, value) = (key.trim().to_ascii_lowercase(), value.trim().to_string());
            match section.as_str() {
                "" | "run" => match key.as_str() {
                    "scenario" => raw.scenario = Some(value),
                    "method" | "methods" => raw.methods = value.split(',').map(|s| s.trim().to_string()).collect(),
                    "h" => raw.h = Some(parse_num("h", &value).map_err(err)?),
                    "duration" => raw.duration = Some(parse_num("duration", &value).map_err(err)?),
                    "out" => raw.out = Some(PathBuf::from(value)),
                    "decimate" => raw.decimate = Some(parse_num("decimate", &value).map_err(err)?),
                    "seed" => raw.seed = Some(parse_num("seed", &value).map_err(err)?),
                    _ => return Err(err(format!("unknown key '{key}'"))),
                },
                "scenario" => raw.sets.push((key, value)),
                "tol" | "tolerances" => raw.tols.push((key, value)),
                s => match s.strip_prefix("method.") {
                    Some(m) => raw.sets.push((format!("{m}.{key}"), value)),
                    None => return Err(err(format!("unknown section '[{s}]'"))),
                },
            }
        }
        Ok(raw)
    }

    /// Overlays `other` (flags) on top of `self` (file).
    pub fn merge(mut self, other: RawConfig) -> Self {
        self.scenario = other.scenario.or(self.scenario);
        if !other.methods.is_empty() {
            self.methods = other.methods;
        }
        self.h = other.h.or(self.h);
        self.duration = other.duration.or(self.duration);
        self.out = other.out.or(self.out);
        self.decimate = other.decimate.or(self.decimate);
        self.seed = other.seed.or(self.seed);
        self.sets.extend(other.sets);
        self.tols.extend(other.tols);
        self
    }

    pub fn into_run_config(self) -> Result<RunConfig, CliError> {
        let scenario = self.scenario.ok_or_else(|| usage("--scenario is required"))?;
        let name: ScenarioName = scenario.parse().map_err(|e: crate::scenarios::ScenarioError| usage(e.to_string()))?;
        let duration = self.duration.ok_or_else(|| usage("--duration is required"))?;
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(usage(format!("duration must be positive, got {duration}")));
        }
        if let Some(h) = self.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(usage(format!("h must be positive, got {h}")));
            }
        }
        let mut methods: Vec<MethodSpec> = self.methods.iter().filter(|m| !m.is_empty()).map(|m| MethodSpec::new(m)).collect();
        if methods.is_empty() {
            return Err(usage("at least one --method is required"));
        }
        let mut spec = ScenarioSpec::new(name).with_seed(self.seed.unwrap_or(42));
        for (key, value) in self.sets {
            if let Some((m, k)) = key.split_once('.') {
                let targets: Vec<&mut MethodSpec> = methods.iter_mut().filter(|s| s.name == m).collect();
                if targets.is_empty() {
                    return Err(usage(format!("setting '{key}' names a method that is not being run")));
                }
                for t in targets {
                    t.settings.insert(k.to_ascii_lowercase(), value.to_ascii_lowercase());
                }
            } else {
                let v: f64 = parse_num(&key, &value).map_err(usage)?;
                spec = spec.with(&key, v);
            }
        }
        let mut tol = Tolerances::default();
        for (key, value) in self.tols {
            let v: f64 = parse_num(&key, &value).map_err(usage)?;
            match key.as_str() {
                "eps_active" => tol.eps_active = v,
                "eps_tangent" => tol.eps_tangent = v,
                "eps_solver" => tol.eps_solver = v,
                _ => return Err(usage(format!("unknown tolerance '{key}'"))),
            }
        }
        tol.validate().map_err(usage)?;
        Ok(RunConfig {
            scenario: spec,
            methods,
            h: self.h,
            duration,
            out: self.out.unwrap_or_else(|| PathBuf::from(".")),
            decimate: self.decimate.unwrap_or(1).max(1),
            tolerances: tol,
        })
    }
}

/// Splits `key=value`.
pub fn parse_key_value(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(format!("empty key in '{s}'"));
    }
    Ok((k.to_ascii_lowercase(), v.trim().to_string()))
}

/// Per-method outcome of a run.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub label: String,
    pub csv: PathBuf,
    pub trace: Trace,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub results: Vec<MethodResult>,
    pub summary_csv: PathBuf,
    pub summary_text: String,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.results.iter().any(|r| r.trace.failure.is_some()) {
            EXIT_STEP_FAILURE
        } else {
            EXIT_OK
        }
    }
}

fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Writes a trace as CSV (`t, q_i, p_i, H, H_mod, J, g_min, f_max, event`).
pub fn write_trace_csv(trace: &Trace, out: &mut impl Write) -> io::Result<()> {
    let n = trace.states.first().map_or(0, |s| s.q.len());
    let mut header = String::from("t");
    for i in 0..n {
        write!(header, ",q_{i}").unwrap();
    }
    for i in 0..n {
        write!(header, ",p_{i}").unwrap();
    }
    header.push_str(",H,H_mod,J,g_min,f_max,event");
    writeln!(out, "{header}")?;
    for (s, r) in trace.states.iter().zip(&trace.records) {
        let mut line = fmt_f(r.t);
        for v in s.q.iter().chain(s.p.iter()) {
            line.push(',');
            line.push_str(&fmt_f(*v));
        }
        for v in [
            r.hamiltonian,
            r.modified_hamiltonian.unwrap_or(f64::NAN),
            r.angular_scalar(),
            r.g_min,
            r.f_max_abs,
        ] {
            line.push(',');
            line.push_str(&fmt_f(v));
        }
        write!(line, ",{}", r.event.code()).unwrap();
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// One line of a summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub samples: usize,
    pub energy: EnvelopeStats,
    pub angular: EnvelopeStats,
    pub g_min: f64,
    pub f_max: f64,
    pub failure_t: Option<f64>,
}

impl SummaryRow {
    pub fn from_trace(label: &str, trace: &Trace) -> Self {
        Self {
            label: label.to_string(),
            samples: trace.steps + 1,
            energy: trace.stats(Quantity::Hamiltonian),
            angular: trace.stats(Quantity::AngularMomentum),
            g_min: trace.g_min,
            f_max: trace.f_max_abs,
            failure_t: trace.failure.as_ref().map(|f| f.t),
        }
    }
}

pub const SUMMARY_HEADER: &str = "method,samples,H_drift,H_mean,H_envelope,J_drift,J_mean,J_envelope,g_min,f_max,failure_t";

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.label,
            r.samples,
            fmt_f(r.energy.max_drift),
            fmt_f(r.energy.mean),
            fmt_f(r.energy.envelope),
            fmt_f(r.angular.max_drift),
            fmt_f(r.angular.mean),
            fmt_f(r.angular.envelope),
            fmt_f(r.g_min),
            fmt_f(r.f_max),
            r.failure_t.map_or("NaN".to_string(), fmt_f)
        )
        .unwrap();
    }
    s
}

pub fn summary_text(rows: &[SummaryRow]) -> String {
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(6).max(6);
    let mut s = format!(
        "{:<width$}  {:>9}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}  {}\n",
        "method", "samples", "|dH|max", "H env", "|dJ|max", "J env", "g_min", "f_max", "failure"
    );
    for r in rows {
        writeln!(
            s,
            "{:<width$}  {:>9}  {:>10.3e}  {:>10.3e}  {:>10.3e}  {:>10.3e}  {:>10.3e}  {:>10.3e}  {}",
            r.label,
            r.samples,
            r.energy.max_drift,
            r.energy.envelope,
            r.angular.max_drift,
            r.angular.envelope,
            r.g_min,
            r.f_max,
            r.failure_t.map_or("-".to_string(), |t| format!("t={t}"))
        )
        .unwrap();
    }
    s
}

fn unique_labels(methods: &[MethodSpec]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    methods
        .iter()
        .map(|m| {
            let c = seen.entry(m.name.clone()).or_insert(0);
            *c += 1;
            if *c == 1 {
                m.name.clone()
            } else {
                format!("{}-{}", m.name, c)
            }
        })
        .collect()
}

/// Executes every method of the run (in parallel), then writes one CSV per
/// method plus `summary.csv` in a fixed order.
pub fn run(config: &RunConfig) -> Result<RunReport, CliError> {
    let scenario = build_scenario(&config.scenario).map_err(|e| usage(e.to_string()))?;
    let h = config.h.unwrap_or(scenario.config.h());
    let cfgs: Vec<IntegratorConfig> = config
        .methods
        .iter()
        .map(|m| m.resolve(&scenario.config, h, config.tolerances))
        .collect::<Result<_, _>>()?;
    let labels = unique_labels(&config.methods);
    let opts = SimOptions {
        decimate: config.decimate,
        ..Default::default()
    };
    let traces: Vec<Trace> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfgs
            .iter()
            .zip(&labels)
            .map(|(cfg, label)| {
                let meta = TraceMeta {
                    scenario: scenario.name.to_string(),
                    method: label.clone(),
                    h,
                    seed: config.scenario.seed,
                };
                let (sys, s0) = (&scenario.system, &scenario.initial);
                scope.spawn(move || simulate(sys, cfg, s0, config.duration, meta, opts))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect::<Result<Vec<_>, _>>()
    })
    .map_err(|e| usage(e.to_string()))?;

    fs::create_dir_all(&config.out).map_err(io_err(&config.out))?;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for (trace, label) in traces.into_iter().zip(labels) {
        let csv = config.out.join(format!("{}_{}.csv", scenario.name, label));
        let file = fs::File::create(&csv).map_err(io_err(&csv))?;
        let mut w = BufWriter::new(file);
        write_trace_csv(&trace, &mut w).and_then(|_| w.flush()).map_err(io_err(&csv))?;
        rows.push(SummaryRow::from_trace(&label, &trace));
        results.push(MethodResult { label, csv, trace });
    }
    let summary_csv_path = config.out.join("summary.csv");
    fs::write(&summary_csv_path, summary_csv(&rows)).map_err(io_err(&summary_csv_path))?;
    Ok(RunReport {
        results,
        summary_csv: summary_csv_path,
        summary_text: summary_text(&rows),
    })
}

/// Summary rows for trace CSV files written by [`run`].
pub fn summarize(paths: &[PathBuf]) -> Result<Vec<SummaryRow>, CliError> {
    if paths.is_empty() {
        return Err(usage("summarize needs at least one trace file"));
    }
    paths.iter().map(|p| summarize_file(p)).collect()
}

fn summarize_file(path: &Path) -> Result<SummaryRow, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let err = |line: usize, message: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| err(1, "empty trace file".into()))?.split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).ok_or_else(|| err(1, format!("missing column '{name}'")));
    let (ci_t, ci_h, ci_j, ci_g, ci_f, ci_e) = (col("t")?, col("H")?, col("J")?, col("g_min")?, col("f_max")?, col("event")?);
    let mut energy = crate::diagnostics::Accumulator::default();
    let mut angular = crate::diagnostics::Accumulator::default();
    let (mut g_min, mut f_max, mut failure_t, mut samples) = (f64::INFINITY, 0.0f64, None, 0usize);
    for (k, line) in lines.enumerate() {
        let ln = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(err(ln, format!("expected {} fields, found {}", header.len(), fields.len())));
        }
        let num = |i: usize| fields[i].trim().parse::<f64>().map_err(|_| err(ln, format!("invalid number '{}'", fields[i])));
        let event = fields[ci_e]
            .trim()
            .parse::<u8>()
            .ok()
            .and_then(Event::from_code)
            .ok_or_else(|| err(ln, format!("invalid event code '{}'", fields[ci_e])))?;
        if event == Event::StepFailure {
            failure_t = Some(num(ci_t)?);
            continue;
        }
        energy.push(num(ci_h)?);
        angular.push(num(ci_j)?);
        g_min = g_min.min(num(ci_g)?);
        f_max = f_max.max(num(ci_f)?);
        samples += 1;
    }
    if samples == 0 {
        return Err(err(2, "trace has no samples".into()));
    }
    let label = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    Ok(SummaryRow {
        label,
        samples,
        energy: energy.stats(),
        angular: angular.stats(),
        g_min,
        f_max,
        failure_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(scenario: &str, methods: &[&str], duration: Option<f64>) -> RawConfig {
        RawConfig {
            scenario: Some(scenario.into()),
            methods: methods.iter().map(|s| s.to_string()).collect(),
            duration,
            ..Default::default()
        }
    }

    #[test]
    fn missing_duration_is_usage_error() {
        let e = raw("particle1d", &["gvi"], None).into_run_config().unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn ini_parsing_and_merge() {
        let text = "scenario = pogo\nmethod = collision, extended-reflection\nh = 0.1\nduration = 5 # short\n\n[scenario]\ndrop_height = 1.5\n[method.collision]\nenergy = verlet-numerical\n[tol]\neps_active = 1e-8\n";
        let file = RawConfig::parse(text, Path::new("cfg.ini")).unwrap();
        let flags = RawConfig {
            duration: Some(7.0),
            ..Default::default()
        };
        let cfg = file.merge(flags).into_run_config().unwrap();
        assert_eq!(cfg.duration, 7.0);
        assert_eq!(cfg.methods.len(), 2);
        assert_eq!(cfg.methods[0].settings["energy"], "verlet-numerical");
        assert_eq!(cfg.scenario.overrides["drop_height"], 1.5);
        assert_eq!(cfg.tolerances.eps_active, 1e-8);
    }

    #[test]
    fn ini_errors_carry_line_numbers() {
        match RawConfig::parse("scenario = pogo\nbogus line\n", Path::new("x.ini")) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn method_names_resolve() {
        let s = build_scenario(&ScenarioSpec::new(ScenarioName::Particle1D)).unwrap();
        let tol = Tolerances::default();
        let c = MethodSpec::new("gvi-midpoint").resolve(&s.config, 0.1, tol).unwrap();
        assert_eq!(c.quadrature.rule, Rule::Midpoint);
        assert_eq!(c.h(), 0.1);
        let c = MethodSpec::new("direct-midpoint").resolve(&s.config, 0.1, tol).unwrap();
        assert_eq!(c.method, Method::DirectMidpoint { alpha: 0.5 });
        let mut m = MethodSpec::new("newmark");
        m.settings.insert("beta".into(), "0".into());
        let c = m.resolve(&s.config, 0.1, tol).unwrap();
        assert!(matches!(c.method, Method::Newmark { beta, .. } if beta == 0.0));
        assert!(MethodSpec::new("leapfrog").resolve(&s.config, 0.1, tol).is_err());
    }

    #[test]
    fn run_writes_expected_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = raw("particle1d", &["gvi-verlet"], Some(1.0));
        r.h = Some(0.01);
        r.out = Some(dir.path().to_path_buf());
        let cfg = r.into_run_config().unwrap();
        let report = run(&cfg).unwrap();
        assert_eq!(report.exit_code(), EXIT_OK);
        let text = fs::read_to_string(&report.results[0].csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,q_0,p_0,H,H_mod,J,g_min,f_max,event");
        assert_eq!(lines.count(), 101);
        let rows = summarize(&[report.results[0].csv.clone()]).unwrap();
        assert!(rows[0].energy.max_drift < 1e-8);
        assert_eq!(rows[0].samples, 101);
    }
}
