//! Config file loading, flag overlay and validation into run configs.

use std::path::{Path, PathBuf};

use peakon_core::dynamics::DEFAULT_TOL;
use peakon_core::experiments::monotonicity::MonotonicityConfig;
use peakon_core::experiments::{AsymptoticsConfig, Density, Perturbation, StabilityConfig, TrainSpec};
use peakon_core::weight::{default_scale, WeightKind, MIN_SCALE};
use peakon_core::{PeakonState, WeightProfile};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::args::*;
use crate::error::{CliError, Result};

pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_IDENTITY_STEP: f64 = 1e-4;
pub const DEFAULT_MAX_RESIDUAL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg]
}

impl Default for Output {
    fn default() -> Self {
        Self {
            dir: None,
            formats: all_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub initial: PeakonState,
    pub t_end: f64,
    pub tol: f64,
    pub samples: usize,
    pub spectrum: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub state: PeakonState,
    pub vectors: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub runs: Vec<StabilityConfig>,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsRun {
    pub asymptotics: AsymptoticsConfig,
    pub max_error: Option<f64>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityConfig {
    pub state: PeakonState,
    pub weight: WeightProfile,
    pub h: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximateConfig {
    pub density: Density,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunConfig {
    Simulate(SimulateConfig),
    Spectrum(SpectrumConfig),
    Stability(SweepConfig),
    Monotonicity(MonotonicityConfig),
    Asymptotics(AsymptoticsRun),
    Identity(IdentityConfig),
    Approximate(ApproximateConfig),
}

/// Reads the config file (if any), overlays the flags and validates.
pub fn parse_config(cmd: &Command) -> Result<(RunConfig, Output)> {
    let common = cmd.common();
    let mut file = match &common.config {
        Some(path) => read_object(path)?,
        None => Map::new(),
    };
    if let Some(c) = file.remove("command") {
        if c.as_str() != Some(cmd.name()) {
            return Err(CliError::usage(format!(
                "config file is for command {c}, not \"{}\"",
                cmd.name()
            )));
        }
    }
    let mut output: Output = match file.remove("output") {
        Some(v) => serde_json::from_value(v).map_err(|e| CliError::usage(format!("output: {e}")))?,
        None => Output::default(),
    };
    if let Some(dir) = &common.out {
        output.dir = Some(dir.clone());
    }
    if let Some(f) = &common.formats {
        output.formats = f
            .iter()
            .map(|s| serde_json::from_value(Value::String(s.clone())).expect("clap restricts format names"))
            .collect();
    }
    let run = match cmd {
        Command::Simulate(a) => resolve_simulate(overlay(file, a)?),
        Command::Spectrum(a) => resolve_spectrum(overlay(file, a)?),
        Command::Stability(a) => resolve_stability(overlay(file, a)?),
        Command::Monotonicity(a) => resolve_monotonicity(overlay(file, a)?),
        Command::Asymptotics(a) => resolve_asymptotics(overlay(file, a)?),
        Command::IdentityCheck(a) => resolve_identity(overlay(file, a)?),
        Command::Approximate(a) => resolve_approximate(overlay(file, a)?),
    }?;
    Ok((run, output))
}

fn read_object(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::usage(format!("{}: expected a JSON object", path.display()))),
        Err(e) => Err(CliError::usage(format!("{}: {e}", path.display()))),
    }
}

/// File values with every flag that was given written on top.
fn overlay<T: Serialize + DeserializeOwned>(mut file: Map<String, Value>, flags: &T) -> Result<T> {
    let Value::Object(given) = serde_json::to_value(flags).expect("flag structs serialize") else {
        unreachable!("flag structs are JSON objects")
    };
    for (k, v) in given {
        if !v.is_null() {
            // a flag replaces the file key and any alias spelling of it
            file.retain(|key, _| !same_field(key, &k));
            file.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(file)).map_err(|e| CliError::usage(e.to_string()))
}

fn same_field(key: &str, canonical: &str) -> bool {
    if key == canonical {
        return true;
    }
    matches!(
        (key, canonical),
        ("spacing", "L") | ("scale", "K") | ("epsilon", "eps") | ("horizon", "T")
    )
}

struct Violations(Vec<String>);

impl Violations {
    fn new() -> Self {
        Self(Vec::new())
    }

    fn need<T: Clone>(&mut self, v: &Option<T>, name: &str) -> Option<T> {
        if v.is_none() {
            self.0.push(format!("missing required field {name}"));
        }
        v.clone()
    }

    fn push(&mut self, msg: impl Into<String>) {
        self.0.push(msg.into());
    }

    fn extend(&mut self, msgs: Vec<String>) {
        self.0.extend(msgs);
    }

    /// K is checked on its own so that it is reported even when other
    /// fields are missing.
    fn scale(&mut self, k: Option<f64>) {
        if k.is_some_and(|k| !(k >= MIN_SCALE)) {
            self.push(format!("K must be >= {MIN_SCALE}"));
        }
    }

    fn finish<T>(mut self, value: impl FnOnce() -> T) -> Result<T> {
        let mut seen = std::collections::HashSet::new();
        self.0.retain(|m| seen.insert(m.clone()));
        if self.0.is_empty() {
            Ok(value())
        } else {
            Err(CliError::Usage(self.0))
        }
    }
}

fn state(v: &mut Violations, t: f64, p: &Option<Vec<f64>>, q: &Option<Vec<f64>>) -> Option<PeakonState> {
    let (p, q) = (v.need(p, "p")?, v.need(q, "q")?);
    match PeakonState::new(t, p, q) {
        Ok(s) => Some(s),
        Err(e) => {
            v.push(e.to_string());
            None
        }
    }
}

fn check_tol(v: &mut Violations, tol: f64) {
    if !(1e-13..=1e-6).contains(&tol) {
        v.push("tol must lie in [1e-13, 1e-6]");
    }
}

fn resolve_simulate(a: SimulateArgs) -> Result<RunConfig> {
    let mut v = Violations::new();
    let initial = state(&mut v, a.t0.unwrap_or(0.0), &a.p, &a.q);
    let t_end = v.need(&a.t_end, "t_end");
    if t_end.is_some_and(|t| !t.is_finite()) {
        v.push("t_end must be finite");
    }
    let tol = a.tol.unwrap_or(DEFAULT_TOL);
    check_tol(&mut v, tol);
    let samples = a.samples.unwrap_or(DEFAULT_SAMPLES);
    if samples < 2 {
        v.push("at least two samples are required");
    }
    if let (Some(s), Some(t)) = (&initial, t_end) {
        if t == s.t {
            v.push("t_end must differ from t0");
        }
    }
    v.finish(|| {
        RunConfig::Simulate(SimulateConfig {
            initial: initial.unwrap(),
            t_end: t_end.unwrap(),
            tol,
            samples,
            spectrum: a.spectrum.unwrap_or(false),
        })
    })
}

fn resolve_spectrum(a: SpectrumArgs) -> Result<RunConfig> {
    let mut v = Violations::new();
    let s = state(&mut v, 0.0, &a.p, &a.q);
    v.finish(|| {
        RunConfig::Spectrum(SpectrumConfig {
            state: s.unwrap(),
            vectors: a.vectors.unwrap_or(false),
        })
    })
}

#[allow(clippy::too_many_arguments)]
fn train(
    v: &mut Violations,
    speeds: &Option<Vec<f64>>,
    shifts: &Option<Vec<f64>>,
    spacing: &Option<f64>,
    seed: Option<u64>,
    random: Option<bool>,
    random_micro: Option<usize>,
    amp: &Option<Vec<f64>>,
    node: &Option<Vec<f64>>,
    micro: &Option<Vec<peakon_core::experiments::MicroPeakon>>,
) -> Option<TrainSpec> {
    let speeds = v.need(speeds, "speeds");
    let spacing = v.need(spacing, "L");
    let perturbation = Perturbation {
        amp: amp.clone().unwrap_or_default(),
        node: node.clone().unwrap_or_default(),
        micro: micro.clone().unwrap_or_default(),
        random: random.unwrap_or(false),
        random_micro: random_micro.unwrap_or(0),
    };
    if perturbation.is_randomized() && seed.is_none() {
        v.push("--seed is required for randomized perturbations");
    }
    let spec = TrainSpec {
        speeds: speeds?,
        shifts: shifts.clone(),
        spacing: spacing?,
        perturbation,
        seed: seed.unwrap_or(0),
    };
    Some(spec)
}

fn resolve_stability(a: StabilityArgs) -> Result<RunConfig> {
    let mut v = Violations::new();
    let spec = train(
        &mut v,
        &a.speeds,
        &a.shifts,
        &a.spacing,
        a.seed,
        a.random,
        a.random_micro,
        &a.amp,
        &a.node,
        &a.micro,
    );
    v.scale(a.scale);
    let eps = v.need(&a.epsilon, "eps").unwrap_or_default();
    if a.epsilon.as_ref().is_some_and(|e| e.is_empty()) {
        v.push("at least one eps is required");
    }
    let t_end = v.need(&a.t_end, "t_end");
    let jobs = a.jobs.unwrap_or(1);
    if jobs == 0 {
        v.push("jobs must be at least 1");
    }
    let mut runs = Vec::new();
    if let (Some(spec), Some(t_end)) = (spec, t_end) {
        let needs_perturbation = eps.iter().any(|e| *e > 0.0);
        let p = &spec.perturbation;
        if needs_perturbation && p.amp.is_empty() && p.node.is_empty() && p.micro.is_empty() && !p.is_randomized() {
            v.push("eps > 0 needs a perturbation (--amp, --node, --micro, --random or --random-micro)");
        }
        for e in eps {
            let mut cfg = StabilityConfig::new(spec.clone(), e, t_end);
            if let Some(k) = a.scale {
                cfg.scale = k;
            }
            cfg.samples = a.samples.unwrap_or(DEFAULT_SAMPLES);
            cfg.tol = a.tol.unwrap_or(DEFAULT_TOL);
            runs.push(cfg);
        }
        // every run shares spec, t_end, K, samples and tol
        if let Some(first) = runs.first() {
            v.extend(first.violations());
        }
        for r in runs.iter().skip(1) {
            if !(r.epsilon >= 0.0 && r.epsilon.is_finite()) {
                v.push("epsilon must be non-negative");
            }
        }
    }
    v.finish(|| RunConfig::Stability(SweepConfig { runs, jobs }))
}

fn resolve_monotonicity(a: MonotonicityArgs) -> Result<RunConfig> {
    let mut v = Violations::new();
    let spec = train(
        &mut v,
        &a.speeds,
        &a.shifts,
        &a.spacing,
        a.seed,
        a.random,
        a.random_micro,
        &a.amp,
        &a.node,
        &a.micro,
    );
    v.scale(a.scale);
    let t_end = v.need(&a.t_end, "t_end");
    let mut out = None;
    if let (Some(spec), Some(t_end)) = (spec, t_end) {
        let scale = a.scale.unwrap_or_else(|| default_scale(spec.spacing));
        let mut cfg = MonotonicityConfig::new(spec, a.epsilon.unwrap_or(0.0), t_end, scale);
        cfg.samples = a.samples.unwrap_or(DEFAULT_SAMPLES);
        cfg.tol = a.tol.unwrap_or(DEFAULT_TOL);
        v.extend(cfg.violations());
        let p = &cfg.train.perturbation;
        if cfg.epsilon > 0.0 && p.amp.is_empty() && p.node.is_empty() && p.micro.is_empty() && !p.is_randomized() {
            v.push("eps > 0 needs a perturbation (--amp, --node, --micro, --random or --random-micro)");
        }
        out = Some(cfg);
    }
    v.finish(|| RunConfig::Monotonicity(out.unwrap()))
}

fn resolve_asymptotics(a: AsymptoticsArgs) -> Result<RunConfig> {
    let mut v = Violations::new();
    let s = state(&mut v, 0.0, &a.p, &a.q);
    let horizon = v.need(&a.horizon, "T");
    if horizon.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
        v.push("T must be positive");
    }
    let tol = a.tol.unwrap_or(DEFAULT_TOL);
    check_tol(&mut v, tol);
    if a.max_error.is_some_and(|e| !(e > 0.0)) {
        v.push("max_error must be positive");
    }
    let samples = a.samples.unwrap_or(DEFAULT_SAMPLES);
    if samples < 2 {
        v.push("at least two samples are required");
    }
    v.finish(|| {
        RunConfig::Asymptotics(AsymptoticsRun {
            asymptotics: AsymptoticsConfig {
                initial: s.unwrap(),
                horizon: horizon.unwrap(),
                tol,
            },
            max_error: a.max_error,
            samples,
        })
    })
}

fn resolve_identity(a: IdentityArgs) -> Result<RunConfig> {
    let mut v = Violations::new();
    let s = state(&mut v, 0.0, &a.p, &a.q);
    let kind = a.kind.as_deref().unwrap_or("psi");
    let kind = match kind {
        "unit" => Some(WeightKind::Unit),
        "psi" => v.need(&a.center, "center").map(|center| WeightKind::Psi { center }),
        "one-minus-psi" => v.need(&a.center, "center").map(|center| WeightKind::OneMinusPsi { center }),
        "psi-difference" => {
            let (l, r) = (v.need(&a.left, "left"), v.need(&a.right, "right"));
            l.zip(r).map(|(left, right)| WeightKind::PsiDifference { left, right })
        }
        other => {
            v.push(format!("unknown weight kind {other}"));
            None
        }
    };
    let scale = a.scale.unwrap_or(peakon_core::weight::MIN_SCALE);
    let weight = kind.and_then(|k| match WeightProfile::new(k, scale) {
        Ok(w) => Some(w),
        Err(e) => {
            v.push(e.to_string());
            None
        }
    });
    let h = a.h.unwrap_or(DEFAULT_IDENTITY_STEP);
    if !(1e-5..=1e-2).contains(&h) {
        v.push("h must lie in [1e-5, 1e-2]");
    }
    let max_residual = a.max_residual.unwrap_or(DEFAULT_MAX_RESIDUAL);
    if !(max_residual > 0.0) {
        v.push("max_residual must be positive");
    }
    v.finish(|| {
        RunConfig::Identity(IdentityConfig {
            state: s.unwrap(),
            weight: weight.unwrap(),
            h,
            max_residual,
        })
    })
}

fn resolve_approximate(a: ApproximateArgs) -> Result<RunConfig> {
    let mut v = Violations::new();
    let mut components = a.boxes.clone().unwrap_or_default();
    components.extend(a.gaussians.clone().unwrap_or_default());
    let density = match (a.density.clone(), components.is_empty()) {
        (Some(_), false) => {
            v.push("give either density or box/gaussian components, not both");
            None
        }
        (Some(d), true) => Some(d),
        (None, false) => Some(Density::Mixture { components }),
        (None, true) => {
            v.push("missing density: use --box, --gaussian or a config file density");
            None
        }
    };
    if let Some(d) = &density {
        if let Err(e) = d.histogram() {
            v.push(e.to_string());
        }
    }
    let n = v.need(&a.n, "n");
    if n == Some(0) {
        v.push("n must be at least 1");
    }
    v.finish(|| {
        RunConfig::Approximate(ApproximateConfig {
            density: density.unwrap(),
            n: n.unwrap(),
        })
    })
}
