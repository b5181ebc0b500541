//! Almost-monotonicity of the energy to the right of the moving cuts.

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_states, uniform_times, PeakonState, DEFAULT_TOL};
use crate::error::{PeakonError, Result};
use crate::experiments::tracking::{locate_peaks, midpoints, modulate};
use crate::experiments::train::TrainSpec;
use crate::functionals::weighted_energy;
use crate::weight::{Sigma0, WeightProfile, MIN_SCALE};

/// Multiple of e^{-σ₀ L / (8K)} allowed for the increase.
pub const MONOTONICITY_CONSTANT: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonotonicityConfig {
    pub train: TrainSpec,
    pub epsilon: f64,
    pub t_end: f64,
    pub scale: f64,
    pub samples: usize,
    pub tol: f64,
}

impl MonotonicityConfig {
    pub fn new(train: TrainSpec, epsilon: f64, t_end: f64, scale: f64) -> Self {
        Self {
            train,
            epsilon,
            t_end,
            scale,
            samples: 200,
            tol: DEFAULT_TOL,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = self.train.violations();
        if self.train.len() < 2 {
            v.push("monotonicity needs at least two peakons".into());
        }
        if !(self.scale >= MIN_SCALE) {
            v.push(format!("K must be >= {MIN_SCALE}"));
        }
        if self.scale > self.train.spacing.sqrt() {
            v.push("K must not exceed sqrt(L)".into());
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            v.push("epsilon must be non-negative".into());
        }
        if !(self.t_end.is_finite() && self.t_end != 0.0) {
            v.push("t_end must be finite and non-zero".into());
        }
        if self.samples < 2 {
            v.push("at least two samples are required".into());
        }
        if !(1e-13..=1e-6).contains(&self.tol) {
            v.push("tol must lie in [1e-13, 1e-6]".into());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicitySeries {
    pub t: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    #[serde(rename = "I")]
    pub i: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicitySummary {
    pub sigma0: f64,
    pub envelope: f64,
    pub bound: f64,
    pub max_increase: f64,
    pub calibrated_constant: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub spec: MonotonicityConfig,
    pub series: MonotonicitySeries,
    pub summary: MonotonicitySummary,
}

pub fn run_monotonicity(cfg: &MonotonicityConfig) -> Result<MonotonicityReport> {
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(PeakonError::Constraint(v.join("; ")));
    }
    let spec = &cfg.train;
    let sigma0 = Sigma0::from_speeds(&spec.speeds)?.value;
    let envelope = (-sigma0 * spec.spacing / (8.0 * cfg.scale)).exp();
    let init = spec.initial_data(cfg.epsilon * cfg.epsilon)?;
    let times = uniform_times(0.0, cfg.t_end, cfg.samples);
    let states = integrate_states(&init.state()?, &times, cfg.tol)?;

    let mut series = MonotonicitySeries {
        t: vec![],
        centers: vec![],
        i: vec![],
    };
    let mut centers = spec.centers();
    for s in &states {
        let u = s.field();
        let peaks = locate_peaks(&u, &midpoints(&centers))?;
        centers = modulate(&u, &spec.speeds, &peaks).unwrap_or(peaks);
        let vals = midpoints(&centers)
            .iter()
            .map(|&y| WeightProfile::psi(y, cfg.scale).map(|w| weighted_energy(&u, &w)))
            .collect::<Result<Vec<_>>>()?;
        series.t.push(s.t);
        series.centers.push(centers.clone());
        series.i.push(vals);
    }
    let first = series.i[0].clone();
    let max_increase = series
        .i
        .iter()
        .flat_map(|row| row.iter().zip(&first).map(|(a, b)| a - b))
        .fold(f64::NEG_INFINITY, f64::max);
    let bound = MONOTONICITY_CONSTANT * envelope;
    Ok(MonotonicityReport {
        spec: cfg.clone(),
        series,
        summary: MonotonicitySummary {
            sigma0,
            envelope,
            bound,
            max_increase,
            calibrated_constant: max_increase / envelope,
            passed: max_increase <= bound,
        },
    })
}

/// ∫ (u² + u_x²) Ψ_K(· - y(t)) along sampled states for a prescribed line y.
pub fn moving_weight_series(states: &[PeakonState], scale: f64, line: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    states
        .iter()
        .map(|s| WeightProfile::psi(line(s.t), scale).map(|w| weighted_energy(&s.field(), &w)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate_at;

    #[test]
    fn single_peakon_falls_behind_faster_line() {
        let (c, c2) = (1.0, 2.0);
        let s = PeakonState::new(0.0, vec![c], vec![0.0]).unwrap();
        let times = uniform_times(0.0, 20.0, 41);
        let tr = integrate_at(&s, &times, 1e-10).unwrap();
        let v = 0.5 * (c + c2);
        let vals = moving_weight_series(&tr.states, 4.0, |t| 2.0 + v * t).unwrap();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
        // backward in time the same line sweeps over the peakon: energy gained
        let back = integrate_at(&s, &uniform_times(0.0, -20.0, 41), 1e-10).unwrap();
        let vals = moving_weight_series(&back.states, 4.0, |t| 2.0 + v * t).unwrap();
        assert!(vals.last().unwrap() > &vals[0]);
    }

    #[test]
    fn scale_limits() {
        let train = TrainSpec::new(vec![1.0, 2.0], 400.0);
        let bad = MonotonicityConfig::new(train.clone(), 0.0, 10.0, 2.0);
        assert!(bad.violations().iter().any(|m| m.contains("K must be >= 4")));
        let big = MonotonicityConfig::new(train, 0.0, 10.0, 25.0);
        assert!(big.violations().iter().any(|m| m.contains("sqrt(L)")));
    }
}
