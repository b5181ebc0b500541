//! Orbital stability of a perturbed peakon train.

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_states, uniform_times, DEFAULT_TOL};
use crate::error::{PeakonError, Result};
use crate::experiments::tracking::{locate_peaks, midpoints, min_shift_distance, modulate};
use crate::experiments::train::TrainSpec;
use crate::field::{h1_dist, PeakedField};
use crate::functionals::{energy, weighted_energy, weighted_f};
use crate::weight::{default_scale, partition, psi_description, WeightProfile, MIN_SCALE};

/// Constant in the localized cubic inequality check.
pub const CUBIC_SLACK_CONSTANT: f64 = 100.0;
/// Allowed spread of sup d / sqrt(eps) across an ε sweep.
pub const SWEEP_SPREAD_LIMIT: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub train: TrainSpec,
    pub epsilon: f64,
    pub t_end: f64,
    pub scale: f64,
    pub samples: usize,
    pub tol: f64,
}

impl StabilityConfig {
    pub fn new(train: TrainSpec, epsilon: f64, t_end: f64) -> Self {
        let scale = default_scale(train.spacing);
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
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            v.push("epsilon must be non-negative".into());
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            v.push("t_end must be positive".into());
        }
        if !(self.scale >= MIN_SCALE) {
            v.push(format!("K must be >= {MIN_SCALE}"));
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

/// Per-sample diagnostics along a train trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySeries {
    pub t: Vec<f64>,
    pub d: Vec<f64>,
    pub peaks: Vec<Vec<f64>>,
    pub modulated: Vec<Option<Vec<f64>>>,
    pub gaps: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
    pub abel: Vec<f64>,
    #[serde(rename = "I")]
    pub i: Vec<Vec<f64>>,
    pub tracked_distance: Vec<f64>,
    pub cubic_margin: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub sup_d: f64,
    pub min_gap: f64,
    pub gap_ok: bool,
    pub sup_abel: f64,
    pub max_peak_offset: f64,
    pub min_cubic_margin: f64,
    pub cubic_ok: bool,
    pub tracking_ok: bool,
    pub perturbation_size: f64,
    pub sweep_constant: Option<f64>,
    pub envelope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub weight: String,
    pub cubic_slack_constant: f64,
}

impl Default for ReportMeta {
    fn default() -> Self {
        Self {
            weight: psi_description(),
            cubic_slack_constant: CUBIC_SLACK_CONSTANT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub spec: StabilityConfig,
    pub meta: ReportMeta,
    pub series: StabilitySeries,
    pub summary: StabilitySummary,
}

impl StabilityReport {
    /// Every assertion-style check passed.
    pub fn passed(&self) -> bool {
        self.summary.gap_ok && self.summary.cubic_ok && self.summary.tracking_ok
    }
}

pub fn run_stability(cfg: &StabilityConfig) -> Result<StabilityReport> {
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(PeakonError::Constraint(v.join("; ")));
    }
    let spec = &cfg.train;
    let speeds = &spec.speeds;
    let n = speeds.len();
    let l = spec.spacing;
    let init = spec.initial_data(cfg.epsilon * cfg.epsilon)?;
    let s0 = init.state()?;
    let norm0 = energy(&init.field).sqrt();
    let slack = CUBIC_SLACK_CONSTANT * norm0.powi(3) / l.sqrt();
    let tail = n as f64 * (-l / 8.0).exp();

    let times = uniform_times(0.0, cfg.t_end, cfg.samples);
    let states = integrate_states(&s0, &times, cfg.tol)?;

    let mut series = StabilitySeries {
        t: Vec::with_capacity(states.len()),
        d: vec![],
        peaks: vec![],
        modulated: vec![],
        gaps: vec![],
        delta: vec![],
        abel: vec![],
        i: vec![],
        tracked_distance: vec![],
        cubic_margin: vec![],
    };
    let mut tracking_ok = true;
    let mut max_peak_offset: f64 = 0.0;
    let mut centers = spec.centers();
    for s in &states {
        let u = s.field();
        let peaks = locate_peaks(&u, &midpoints(&centers))?;
        let tilde = modulate(&u, speeds, &peaks).ok();
        if let Some(xt) = &tilde {
            for (a, b) in xt.iter().zip(&peaks) {
                max_peak_offset = max_peak_offset.max((a - b).abs());
            }
        }
        centers = tilde.clone().unwrap_or_else(|| peaks.clone());
        let fit = min_shift_distance(&u, speeds, &peaks)?;
        let tracked = h1_dist(&u, &PeakedField::train(speeds, &peaks)?);
        if tracked > 10.0 * fit.distance + tail {
            tracking_ok = false;
        }

        let maxima: Vec<f64> = peaks.iter().map(|&x| u.value(x)).collect();
        let delta: Vec<f64> = speeds.iter().zip(&maxima).map(|(c, m)| c - m).collect();
        let abel = delta
            .iter()
            .zip(speeds)
            .map(|(d, c)| d * d * (c - d / 3.0))
            .sum();

        let cuts = midpoints(&centers);
        let weights = cuts
            .iter()
            .map(|&y| WeightProfile::psi(y, cfg.scale))
            .collect::<Result<Vec<_>>>()?;
        let i_vals = weights.iter().map(|w| weighted_energy(&u, w)).collect();
        let parts = partition(&cuts, cfg.scale)?;
        let margins = parts
            .iter()
            .zip(&maxima)
            .map(|(phi, &m)| {
                let e = weighted_energy(&u, phi);
                let f = weighted_f(&u, phi);
                m * e - 2.0 / 3.0 * m * m * m + slack - f
            })
            .collect();

        series.t.push(s.t);
        series.d.push(fit.distance);
        series.gaps.push(peaks.windows(2).map(|w| w[1] - w[0]).collect());
        series.peaks.push(peaks);
        series.modulated.push(tilde);
        series.delta.push(delta);
        series.abel.push(abel);
        series.i.push(i_vals);
        series.tracked_distance.push(tracked);
        series.cubic_margin.push(margins);
    }

    let sup_d = series.d.iter().copied().fold(0.0, f64::max);
    let min_gap = series
        .gaps
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let min_margin = series
        .cubic_margin
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let summary = StabilitySummary {
        sup_d,
        min_gap,
        gap_ok: n < 2 || min_gap > 0.5 * l,
        sup_abel: series.abel.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_peak_offset,
        min_cubic_margin: min_margin,
        cubic_ok: min_margin >= 0.0,
        tracking_ok,
        perturbation_size: init.size,
        sweep_constant: None,
        envelope: None,
    };
    Ok(StabilityReport {
        spec: cfg.clone(),
        meta: ReportMeta::default(),
        series,
        summary,
    })
}

/// Cross-run comparison of an ε sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub epsilons: Vec<f64>,
    pub sup_d: Vec<f64>,
    pub scaled: Vec<f64>,
    pub sweep_constant: f64,
    pub spread: f64,
    pub spread_ok: bool,
    pub sup_d_monotone: bool,
    pub abel: Vec<f64>,
    pub abel_decreasing: bool,
    pub gaps_ok: bool,
    pub amplitude_fit: f64,
}

impl SweepSummary {
    pub fn passed(&self) -> bool {
        self.spread_ok && self.sup_d_monotone && self.abel_decreasing && self.gaps_ok
    }
}

/// Summarizes runs (any order) and writes the sweep constant and the fitted
/// envelope A(√ε + L^{-1/8}) into each report.
pub fn summarize_sweep(runs: &mut [StabilityReport]) -> SweepSummary {
    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&a, &b| runs[a].spec.epsilon.total_cmp(&runs[b].spec.epsilon));
    let eps: Vec<f64> = order.iter().map(|&k| runs[k].spec.epsilon).collect();
    let sup_d: Vec<f64> = order.iter().map(|&k| runs[k].summary.sup_d).collect();
    let abel: Vec<f64> = order.iter().map(|&k| runs[k].summary.sup_abel).collect();
    let scaled: Vec<f64> = sup_d.iter().zip(&eps).map(|(d, e)| d / e.sqrt()).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = max / min;
    let amplitude_fit = order
        .iter()
        .map(|&k| {
            let r = &runs[k];
            r.summary.sup_d / (r.spec.epsilon.sqrt() + r.spec.train.spacing.powf(-0.125))
        })
        .fold(0.0, f64::max);
    for r in runs.iter_mut() {
        r.summary.sweep_constant = Some(max);
        r.summary.envelope = Some(amplitude_fit * (r.spec.epsilon.sqrt() + r.spec.train.spacing.powf(-0.125)));
    }
    SweepSummary {
        sup_d_monotone: sup_d.windows(2).all(|w| w[0] < w[1]),
        abel_decreasing: abel.windows(2).all(|w| w[0] < w[1]),
        gaps_ok: runs.iter().all(|r| r.summary.gap_ok),
        spread_ok: spread <= SWEEP_SPREAD_LIMIT,
        epsilons: eps,
        sup_d,
        scaled,
        sweep_constant: max,
        spread,
        abel,
        amplitude_fit,
    }
}
