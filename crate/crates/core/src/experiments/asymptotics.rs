//! Long-time limits: momenta and speeds approach the eigenvalues of A.

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, rhs, PeakonState};
use crate::error::{PeakonError, Result};
use crate::experiments::tracking::min_shift_distance;
use crate::spectral::spectrum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limit {
    pub time: f64,
    pub target: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub speed: Vec<f64>,
    pub p_error: f64,
    pub speed_error: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsConfig {
    pub initial: PeakonState,
    pub horizon: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub spec: AsymptoticsConfig,
    pub lambda: Vec<f64>,
    pub forward: Limit,
    pub backward: Limit,
}

fn limit(s0: &PeakonState, time: f64, target: Vec<f64>, tol: f64) -> Result<Limit> {
    let tr = integrate(s0, time, tol)?;
    let s = tr.last().clone();
    let (speed, _) = rhs(&s)?;
    let err = |v: &[f64]| v.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let fit = min_shift_distance(&s.field(), &target, &s.q)?;
    Ok(Limit {
        time: s.t,
        p_error: err(&s.p),
        speed_error: err(&speed),
        distance: fit.distance,
        target,
        p: s.p,
        q: s.q,
        speed,
    })
}

/// Integrates to ±T and compares p, q̇ with the spectrum: ascending order
/// forward, descending backward.
pub fn run_asymptotics(cfg: &AsymptoticsConfig) -> Result<AsymptoticsReport> {
    cfg.initial.validate()?;
    if !(cfg.horizon > 0.0 && cfg.horizon.is_finite()) {
        return Err(PeakonError::Domain("horizon must be positive".into()));
    }
    let lambda = spectrum(&cfg.initial)?.lambda;
    let t0 = cfg.initial.t;
    let forward = limit(&cfg.initial, t0 + cfg.horizon, lambda.clone(), cfg.tol)?;
    let descending: Vec<f64> = lambda.iter().rev().copied().collect();
    let backward = limit(&cfg.initial, t0 - cfg.horizon, descending, cfg.tol)?;
    Ok(AsymptoticsReport {
        spec: cfg.clone(),
        lambda,
        forward,
        backward,
    })
}
