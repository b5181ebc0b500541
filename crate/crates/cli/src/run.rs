//! Command execution: run configs in, artifacts out.

use peakon_core::dynamics::{integrate_at, uniform_times, Drift, Trajectory};
use peakon_core::experiments::monotonicity::{MonotonicityConfig, MonotonicityReport};
use peakon_core::experiments::{
    approximate_from_density, check_energy_identity, density_distance, run_asymptotics, run_monotonicity,
    run_stability, summarize_sweep, AsymptoticsReport, IdentityCheck, StabilityReport, SweepSummary,
};
use peakon_core::{eigen_residual, eigenpairs, spectrum, PeakonState};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::*;
use crate::emit::{columns, num, to_json, Artifacts, Table};
use crate::error::{CliError, Result};
use crate::svg::{Plot, Series};

pub fn execute(run: &RunConfig) -> Result<Artifacts> {
    match run {
        RunConfig::Simulate(c) => simulate(c),
        RunConfig::Spectrum(c) => spectrum_cmd(c),
        RunConfig::Stability(c) => stability(c),
        RunConfig::Monotonicity(c) => monotonicity(c),
        RunConfig::Asymptotics(c) => asymptotics(c),
        RunConfig::Identity(c) => identity(c),
        RunConfig::Approximate(c) => approximate(c),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub spec: SimulateConfig,
    pub trajectory: Trajectory,
    pub drift: Drift,
}

pub fn trajectory_table(tr: &Trajectory) -> Table {
    let n = tr.states.first().map_or(0, |s| s.len());
    let mut header = vec!["t".to_string()];
    header.extend(columns("q", n));
    header.extend(columns("p", n));
    header.extend(["E", "F", "sum_p"].map(String::from));
    if tr.spectrum.is_some() {
        header.extend(columns("lambda", n));
    }
    let mut t = Table::new(header);
    for (k, s) in tr.states.iter().enumerate() {
        let mut row = vec![num(s.t)];
        row.extend(s.q.iter().map(|x| num(*x)));
        row.extend(s.p.iter().map(|x| num(*x)));
        row.extend([tr.energy[k], tr.moment_f[k], tr.sum_p[k]].map(num));
        if let Some(sp) = &tr.spectrum {
            row.extend(sp[k].iter().map(|x| num(*x)));
        }
        t.push(row);
    }
    t
}

fn simulate(c: &SimulateConfig) -> Result<Artifacts> {
    let times = uniform_times(c.initial.t, c.t_end, c.samples);
    let mut tr = integrate_at(&c.initial, &times, c.tol)?;
    if c.spectrum {
        tr = tr.with_spectrum()?;
    }
    let drift = tr.max_relative_drift();
    let t = tr.times();
    let n = c.initial.len();
    let mut pos = Plot::new("Peakon positions", "t", "q");
    let mut mom = Plot::new("Peakon momenta", "t", "p");
    for i in 0..n {
        pos = pos.with(Series::new(format!("q_{}", i + 1), t.clone(), tr.states.iter().map(|s| s.q[i]).collect()));
        mom = mom.with(Series::new(format!("p_{}", i + 1), t.clone(), tr.states.iter().map(|s| s.p[i]).collect()));
    }
    let summary = vec![format!(
        "simulate: {} samples, relative drift E {:.3e}, F {:.3e}, sum p {:.3e}",
        tr.states.len(),
        drift.energy,
        drift.moment_f,
        drift.sum_p
    )];
    let report = SimulateReport {
        spec: c.clone(),
        trajectory: tr,
        drift,
    };
    Ok(Artifacts {
        json: to_json(&report),
        tables: vec![("trajectory".into(), trajectory_table(&report.trajectory))],
        plots: vec![("positions".into(), pos), ("momenta".into(), mom)],
        passed: true,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub spec: SpectrumConfig,
    pub lambda: Vec<f64>,
    pub vectors: Option<Vec<Vec<f64>>>,
    pub residuals: Option<Vec<f64>>,
}

fn spectrum_cmd(c: &SpectrumConfig) -> Result<Artifacts> {
    let (lambda, vectors, residuals) = if c.vectors {
        let e = eigenpairs(&c.state)?;
        let r = e
            .lambda
            .iter()
            .zip(&e.vectors)
            .map(|(l, v)| eigen_residual(&c.state, *l, v))
            .collect::<peakon_core::Result<Vec<_>>>()?;
        (e.lambda, Some(e.vectors), Some(r))
    } else {
        (spectrum(&c.state)?.lambda, None, None)
    };
    let n = lambda.len();
    let mut header = vec!["i".to_string(), "lambda".to_string()];
    if vectors.is_some() {
        header.extend(columns("v", n));
        header.push("residual".into());
    }
    let mut t = Table::new(header);
    for i in 0..n {
        let mut row = vec![(i + 1).to_string(), num(lambda[i])];
        if let (Some(v), Some(r)) = (&vectors, &residuals) {
            row.extend(v[i].iter().map(|x| num(*x)));
            row.push(num(r[i]));
        }
        t.push(row);
    }
    let report = SpectrumReport {
        spec: c.clone(),
        lambda,
        vectors,
        residuals,
    };
    Ok(Artifacts {
        json: to_json(&report),
        tables: vec![("spectrum".into(), t)],
        plots: vec![],
        passed: true,
        summary: vec![format!("spectrum: {:?}", report.lambda)],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub runs: Vec<StabilityReport>,
    pub sweep: Option<SweepSummary>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.runs.iter().all(StabilityReport::passed) && self.sweep.as_ref().is_none_or(SweepSummary::passed)
    }
}

/// Runs the sweep on `jobs` workers; results keep the input order.
pub fn run_sweep(c: &SweepConfig) -> Result<SweepReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(c.jobs)
        .build()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    let mut runs = pool
        .install(|| c.runs.par_iter().map(run_stability).collect::<peakon_core::Result<Vec<_>>>())?;
    let sweep = (runs.len() > 1).then(|| summarize_sweep(&mut runs));
    Ok(SweepReport { runs, sweep })
}

pub fn stability_table(r: &StabilityReport) -> Table {
    let n = r.spec.train.len();
    let s = &r.series;
    let mut header = vec!["t".to_string(), "d".to_string(), "tracked_d".to_string()];
    header.extend(columns("x", n));
    header.extend(columns("xm", n));
    header.extend(columns("gap", n.saturating_sub(1)));
    header.extend(columns("delta", n));
    header.push("abel".into());
    header.extend((2..=n).map(|j| format!("I_{j}")));
    header.extend(columns("cubic_margin", n));
    let mut t = Table::new(header);
    for k in 0..s.t.len() {
        let mut row = vec![num(s.t[k]), num(s.d[k]), num(s.tracked_distance[k])];
        row.extend(s.peaks[k].iter().map(|x| num(*x)));
        match &s.modulated[k] {
            Some(m) => row.extend(m.iter().map(|x| num(*x))),
            None => row.extend(std::iter::repeat_n(String::new(), n)),
        }
        row.extend(s.gaps[k].iter().map(|x| num(*x)));
        row.extend(s.delta[k].iter().map(|x| num(*x)));
        row.push(num(s.abel[k]));
        row.extend(s.i[k].iter().map(|x| num(*x)));
        row.extend(s.cubic_margin[k].iter().map(|x| num(*x)));
        t.push(row);
    }
    t
}

fn run_name(r: &StabilityReport) -> String {
    format!("stability_eps{}", r.spec.epsilon)
}

fn stability(c: &SweepConfig) -> Result<Artifacts> {
    let report = run_sweep(c)?;
    let mut tables: Vec<(String, Table)> = report.runs.iter().map(|r| (run_name(r), stability_table(r))).collect();
    let mut d_plot = Plot::new("Shift-minimized distance to the train", "t", "d(t)").log_y();
    for r in &report.runs {
        d_plot = d_plot.with(Series::new(format!("eps {}", r.spec.epsilon), r.series.t.clone(), r.series.d.clone()));
    }
    for r in &report.runs {
        if let Some(env) = r.summary.envelope {
            let t = r.series.t.clone();
            let y = vec![env; t.len()];
            d_plot = d_plot.with(Series::new(format!("envelope eps {}", r.spec.epsilon), t, y).dashed());
        }
    }
    let mut plots = vec![("distance".to_string(), d_plot)];
    if let Some(first) = report.runs.first() {
        let mut gap_plot = Plot::new("Gaps between tracked peaks", "t", "gap");
        for r in &report.runs {
            for j in 0..r.spec.train.len().saturating_sub(1) {
                gap_plot = gap_plot.with(Series::new(
                    format!("eps {} gap {}", r.spec.epsilon, j + 1),
                    r.series.t.clone(),
                    r.series.gaps.iter().map(|g| g[j]).collect(),
                ));
            }
        }
        let half = 0.5 * first.spec.train.spacing;
        gap_plot = gap_plot.with(Series::new("L/2", vec![0.0, first.spec.t_end], vec![half, half]).dashed());
        plots.push(("gaps".into(), gap_plot));
    }
    let mut summary: Vec<String> = report
        .runs
        .iter()
        .map(|r| {
            format!(
                "eps {}: sup d {:.6e}, min gap {:.6}, gap {}, cubic {}, tracking {}",
                r.spec.epsilon,
                r.summary.sup_d,
                r.summary.min_gap,
                ok(r.summary.gap_ok),
                ok(r.summary.cubic_ok),
                ok(r.summary.tracking_ok)
            )
        })
        .collect();
    if let Some(s) = &report.sweep {
        let mut t = Table::new(["epsilon", "sup_d", "sup_d_over_sqrt_eps", "abel"].map(String::from).to_vec());
        for k in 0..s.epsilons.len() {
            t.push(vec![num(s.epsilons[k]), num(s.sup_d[k]), num(s.scaled[k]), num(s.abel[k])]);
        }
        tables.push(("sweep".into(), t));
        summary.push(format!(
            "sweep: spread {:.4} (limit {}), {}; sup d monotone {}; abel ordered {}",
            s.spread,
            peakon_core::experiments::stability::SWEEP_SPREAD_LIMIT,
            ok(s.spread_ok),
            ok(s.sup_d_monotone),
            ok(s.abel_decreasing)
        ));
    }
    Ok(Artifacts {
        json: to_json(&report),
        passed: report.passed(),
        tables,
        plots,
        summary,
    })
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

fn monotonicity(c: &MonotonicityConfig) -> Result<Artifacts> {
    let r: MonotonicityReport = run_monotonicity(c)?;
    let n = c.train.len();
    let mut header = vec!["t".to_string()];
    header.extend(columns("center", n));
    header.extend((2..=n).map(|j| format!("I_{j}")));
    let mut t = Table::new(header);
    for k in 0..r.series.t.len() {
        let mut row = vec![num(r.series.t[k])];
        row.extend(r.series.centers[k].iter().map(|x| num(*x)));
        row.extend(r.series.i[k].iter().map(|x| num(*x)));
        t.push(row);
    }
    let mut plot = Plot::new("Weighted energy increase", "t", "I_j(t) - I_j(0)");
    for j in 0..n - 1 {
        let base = r.series.i[0][j];
        plot = plot.with(Series::new(
            format!("I_{}", j + 2),
            r.series.t.clone(),
            r.series.i.iter().map(|row| row[j] - base).collect(),
        ));
    }
    let t_end = c.t_end;
    plot = plot.with(Series::new("bound", vec![0.0, t_end], vec![r.summary.bound; 2]).dashed());
    let summary = vec![format!(
        "monotonicity: max increase {:.6e}, bound {:.6e}, {}",
        r.summary.max_increase,
        r.summary.bound,
        ok(r.summary.passed)
    )];
    Ok(Artifacts {
        json: to_json(&r),
        passed: r.summary.passed,
        tables: vec![("monotonicity".into(), t)],
        plots: vec![("monotonicity".into(), plot)],
        summary,
    })
}

fn asymptotics(c: &AsymptoticsRun) -> Result<Artifacts> {
    let r: AsymptoticsReport = run_asymptotics(&c.asymptotics)?;
    let mut t = Table::new(
        ["direction", "time", "i", "target", "p", "q", "speed"]
            .map(String::from)
            .to_vec(),
    );
    for (dir, lim) in [("forward", &r.forward), ("backward", &r.backward)] {
        for i in 0..lim.p.len() {
            t.push(vec![
                dir.to_string(),
                num(lim.time),
                (i + 1).to_string(),
                num(lim.target[i]),
                num(lim.p[i]),
                num(lim.q[i]),
                num(lim.speed[i]),
            ]);
        }
    }
    let s0 = &c.asymptotics.initial;
    let half = (c.samples / 2).max(2);
    let back = integrate_at(s0, &uniform_times(s0.t, s0.t - c.asymptotics.horizon, half), c.asymptotics.tol)?;
    let fwd = integrate_at(s0, &uniform_times(s0.t, s0.t + c.asymptotics.horizon, half), c.asymptotics.tol)?;
    let states: Vec<&PeakonState> = back.states.iter().rev().chain(fwd.states.iter().skip(1)).collect();
    let times: Vec<f64> = states.iter().map(|s| s.t).collect();
    let mut plot = Plot::new("Momenta approach the spectrum", "t", "p");
    for i in 0..s0.len() {
        plot = plot.with(Series::new(format!("p_{}", i + 1), times.clone(), states.iter().map(|s| s.p[i]).collect()));
    }
    for (i, l) in r.lambda.iter().enumerate() {
        plot = plot.with(Series::new(format!("lambda_{}", i + 1), vec![times[0], *times.last().unwrap()], vec![*l; 2]).dashed());
    }
    let worst = r
        .forward
        .p_error
        .max(r.forward.speed_error)
        .max(r.backward.p_error)
        .max(r.backward.speed_error);
    let passed = c.max_error.is_none_or(|m| worst <= m);
    let summary = vec![format!(
        "asymptotics: lambda {:?}, max |p - lambda|, |qdot - lambda| at +-T: {:.3e}{}",
        r.lambda,
        worst,
        c.max_error.map_or(String::new(), |m| format!(" (limit {m:e}, {})", ok(passed)))
    )];
    Ok(Artifacts {
        json: to_json(&r),
        passed,
        tables: vec![("asymptotics".into(), t)],
        plots: vec![("momenta".into(), plot)],
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub spec: IdentityConfig,
    pub check: IdentityCheck,
    pub half_step: IdentityCheck,
    pub richardson_ratio: f64,
    pub passed: bool,
}

fn identity(c: &IdentityConfig) -> Result<Artifacts> {
    let check = check_energy_identity(&c.state, &c.weight, c.h)?;
    let half_step = if c.h / 2.0 >= 1e-5 {
        check_energy_identity(&c.state, &c.weight, c.h / 2.0)?
    } else {
        check
    };
    let ratio = check.residual / half_step.residual;
    let passed = check.residual <= c.max_residual;
    let mut t = Table::new(["h", "lhs", "rhs", "residual"].map(String::from).to_vec());
    t.push(vec![num(c.h), num(check.lhs), num(check.rhs), num(check.residual)]);
    t.push(vec![num(c.h / 2.0), num(half_step.lhs), num(half_step.rhs), num(half_step.residual)]);
    let summary = vec![format!(
        "identity: residual {:.3e} at h = {:e} (limit {:e}, {}), ratio to h/2 {:.4}",
        check.residual,
        c.h,
        c.max_residual,
        ok(passed),
        ratio
    )];
    let report = IdentityReport {
        spec: c.clone(),
        check,
        half_step,
        richardson_ratio: ratio,
        passed,
    };
    Ok(Artifacts {
        json: to_json(&report),
        passed,
        tables: vec![("identity".into(), t)],
        plots: vec![],
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximateReport {
    pub spec: ApproximateConfig,
    pub mass: f64,
    pub state: PeakonState,
    pub distance: f64,
}

fn approximate(c: &ApproximateConfig) -> Result<Artifacts> {
    let state = approximate_from_density(&c.density, c.n)?;
    let distance = density_distance(&c.density, &state)?;
    let mass = c.density.histogram()?.mass();
    let mut t = Table::new(["i", "p", "q"].map(String::from).to_vec());
    for i in 0..state.len() {
        t.push(vec![(i + 1).to_string(), num(state.p[i]), num(state.q[i])]);
    }
    let summary = vec![format!("approximate: {} peakons, H1 distance {:.6e}", c.n, distance)];
    let report = ApproximateReport {
        spec: c.clone(),
        mass,
        state,
        distance,
    };
    Ok(Artifacts {
        json: to_json(&report),
        passed: true,
        tables: vec![("peakons".into(), t)],
        plots: vec![],
        summary,
    })
}
