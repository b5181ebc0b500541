//! Browser bindings. Each export is a thin wrapper over a plain function so
//! the logic can be tested without a JS host.

use peakon_core::dynamics::{integrate_at, uniform_times, DEFAULT_TOL};
use peakon_core::experiments::{run_stability, Perturbation, StabilityConfig, TrainSpec};
use peakon_core::{spectrum, PeakonState};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Samples of a multipeakon flow, flattened for typed-array transfer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flow {
    pub n: usize,
    pub t: Vec<f64>,
    /// Row-major: sample k occupies `q[k*n..(k+1)*n]`.
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub energy: Vec<f64>,
    pub lambda: Vec<f64>,
}

pub fn flow(p: &[f64], q: &[f64], t_end: f64, samples: usize) -> Result<Flow, String> {
    if samples < 2 {
        return Err("need at least two samples".into());
    }
    let s0 = PeakonState::new(0.0, p.to_vec(), q.to_vec()).map_err(|e| e.to_string())?;
    let lambda = spectrum(&s0).map_err(|e| e.to_string())?.lambda;
    let tr = integrate_at(&s0, &uniform_times(0.0, t_end, samples), DEFAULT_TOL).map_err(|e| e.to_string())?;
    Ok(Flow {
        n: p.len(),
        t: tr.times(),
        q: tr.states.iter().flat_map(|s| s.q.iter().copied()).collect(),
        p: tr.states.iter().flat_map(|s| s.p.iter().copied()).collect(),
        energy: tr.energy,
        lambda,
    })
}

/// u(x) = Σ pᵢ e^{-|x - qᵢ|} on `count` points of [lo, hi].
pub fn profile_values(p: &[f64], q: &[f64], lo: f64, hi: f64, count: usize) -> Result<Vec<f64>, String> {
    let s = PeakonState::new(0.0, p.to_vec(), q.to_vec()).map_err(|e| e.to_string())?;
    let u = s.field();
    Ok(uniform_times(lo, hi, count).into_iter().map(|x| u.value(x)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityTrace {
    pub t: Vec<f64>,
    pub d: Vec<f64>,
    pub sup_d: f64,
    pub min_gap: f64,
    pub passed: bool,
}

/// Perturbed train with seeded directions and one micro-peakon per gap.
pub fn stability_trace(speeds: &[f64], spacing: f64, eps: f64, t_end: f64, seed: u64) -> Result<StabilityTrace, String> {
    let mut spec = TrainSpec::new(speeds.to_vec(), spacing);
    spec.perturbation = Perturbation::seeded(speeds.len());
    spec.seed = seed;
    let mut cfg = StabilityConfig::new(spec, eps, t_end);
    cfg.samples = 120;
    let r = run_stability(&cfg).map_err(|e| e.to_string())?;
    let passed = r.passed();
    Ok(StabilityTrace {
        t: r.series.t,
        d: r.series.d,
        sup_d: r.summary.sup_d,
        min_gap: r.summary.min_gap,
        passed,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// JSON-encoded [`Flow`].
#[wasm_bindgen]
pub fn simulate(p: &[f64], q: &[f64], t_end: f64, samples: usize) -> Result<String, JsError> {
    to_js(flow(p, q, t_end, samples))
}

#[wasm_bindgen]
pub fn profile(p: &[f64], q: &[f64], lo: f64, hi: f64, count: usize) -> Result<Vec<f64>, JsError> {
    profile_values(p, q, lo, hi, count).map_err(|e| JsError::new(&e))
}

/// Eigenvalues of the isospectral matrix: the limiting speeds.
#[wasm_bindgen]
pub fn speeds(p: &[f64], q: &[f64]) -> Result<Vec<f64>, JsError> {
    let s = PeakonState::new(0.0, p.to_vec(), q.to_vec()).map_err(|e| JsError::new(&e.to_string()))?;
    spectrum(&s).map(|sp| sp.lambda).map_err(|e| JsError::new(&e.to_string()))
}

/// JSON-encoded [`StabilityTrace`].
#[wasm_bindgen]
pub fn stability(speeds: &[f64], spacing: f64, eps: f64, t_end: f64, seed: u32) -> Result<String, JsError> {
    to_js(stability_trace(speeds, spacing, eps, t_end, u64::from(seed)))
}
