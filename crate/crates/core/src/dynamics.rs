//! Multipeakon ODE
//!
//!   q̇_i = Σ_j p_j e^{-|q_i - q_j|},   ṗ_i = Σ_j p_i p_j sgn(q_i - q_j) e^{-|q_i - q_j|}
//!
//! integrated by Dormand-Prince 5(4) with PI step control and dense output.

use serde::{Deserialize, Serialize};

use crate::error::{PeakonError, Result};
use crate::field::{sign0, PeakedField};
use crate::functionals::{energy, moment_f};
use crate::spectral::spectrum;
use crate::sum::CompensatedSum;

pub const GAP_TOL: f64 = 1e-9;
pub const MIN_STEP: f64 = 1e-12;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_STEPS: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakonState {
    pub t: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl PeakonState {
    pub fn new(t: f64, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let s = Self { t, p, q };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.len() != self.q.len() {
            return Err(PeakonError::State(format!(
                "{} momenta but {} positions",
                self.p.len(),
                self.q.len()
            )));
        }
        if !self.t.is_finite() || self.p.iter().chain(&self.q).any(|x| !x.is_finite()) {
            return Err(PeakonError::State("non-finite entry".into()));
        }
        if let Some(i) = self.p.iter().position(|&x| x <= 0.0) {
            return Err(PeakonError::State(format!("p[{i}] = {} is not positive", self.p[i])));
        }
        if let Some(i) = self.q.windows(2).position(|w| w[1] - w[0] < GAP_TOL) {
            return Err(PeakonError::State(format!(
                "positions {} and {} are not increasing by at least {GAP_TOL}",
                i,
                i + 1
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn field(&self) -> PeakedField {
        PeakedField::new(self.p.clone(), self.q.clone()).expect("valid state gives a valid field")
    }

    /// (p_i, q_i) -> (p_{N+1-i}, -q_{N+1-i}).
    pub fn mirrored(&self) -> Self {
        Self {
            t: self.t,
            p: self.p.iter().rev().copied().collect(),
            q: self.q.iter().rev().map(|x| -x).collect(),
        }
    }

    pub fn min_gap(&self) -> f64 {
        self.q.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }
}

fn rhs_into(q: &[f64], p: &[f64], dq: &mut [f64], dp: &mut [f64]) {
    let n = q.len();
    for i in 0..n {
        let mut sq = p[i];
        let mut sp = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let e = (-(q[i] - q[j]).abs()).exp();
            sq += p[j] * e;
            sp += p[j] * sign0(q[i] - q[j]) * e;
        }
        dq[i] = sq;
        dp[i] = p[i] * sp;
    }
}

/// (q̇, ṗ).
pub fn rhs(s: &PeakonState) -> Result<(Vec<f64>, Vec<f64>)> {
    s.validate()?;
    let n = s.len();
    let mut dq = vec![0.0; n];
    let mut dp = vec![0.0; n];
    rhs_into(&s.q, &s.p, &mut dq, &mut dp);
    Ok((dq, dp))
}

/// ½ Σ p_i p_j e^{-|q_i - q_j|}.
pub fn hamiltonian(s: &PeakonState) -> f64 {
    let mut acc = CompensatedSum::new();
    for i in 0..s.len() {
        for j in 0..s.len() {
            acc.add(0.5 * s.p[i] * s.p[j] * (-(s.q[i] - s.q[j]).abs()).exp());
        }
    }
    acc.value()
}

/// Sampled solution with conserved observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<PeakonState>,
    pub energy: Vec<f64>,
    pub moment_f: Vec<f64>,
    pub sum_p: Vec<f64>,
    pub spectrum: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn from_states(states: Vec<PeakonState>) -> Self {
        let fields: Vec<PeakedField> = states.iter().map(PeakonState::field).collect();
        Self {
            energy: fields.iter().map(energy).collect(),
            moment_f: fields.iter().map(moment_f).collect(),
            sum_p: states
                .iter()
                .map(|s| s.p.iter().copied().collect::<CompensatedSum>().value())
                .collect(),
            spectrum: None,
            states,
        }
    }

    pub fn with_spectrum(mut self) -> Result<Self> {
        let sp = self
            .states
            .iter()
            .map(|s| spectrum(s).map(|x| x.lambda))
            .collect::<Result<Vec<_>>>()?;
        self.spectrum = Some(sp);
        Ok(self)
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &PeakonState {
        self.states.last().expect("trajectory has at least one sample")
    }

    /// Largest relative change of each observable against the first sample.
    pub fn max_relative_drift(&self) -> Drift {
        let rel = |v: &[f64]| {
            let v0 = v[0];
            v.iter().map(|x| ((x - v0) / v0).abs()).fold(0.0, f64::max)
        };
        let spectrum = self.spectrum.as_ref().map(|sp| {
            (0..sp[0].len())
                .map(|i| {
                    let col: Vec<f64> = sp.iter().map(|l| l[i]).collect();
                    rel(&col)
                })
                .collect()
        });
        Drift {
            energy: rel(&self.energy),
            moment_f: rel(&self.moment_f),
            sum_p: rel(&self.sum_p),
            spectrum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub energy: f64,
    pub moment_f: f64,
    pub sum_p: f64,
    pub spectrum: Option<Vec<f64>>,
}

/// Integrates from `s0` to `t_end`, sampling both ends.
pub fn integrate(s0: &PeakonState, t_end: f64, tol: f64) -> Result<Trajectory> {
    if t_end == s0.t {
        return integrate_at(s0, &[s0.t], tol);
    }
    integrate_at(s0, &[s0.t, t_end], tol)
}

/// `count` equally spaced samples from `s0.t` to `t_end` inclusive.
pub fn uniform_times(t0: f64, t_end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![t_end],
        _ => (0..count)
            .map(|i| {
                if i + 1 == count {
                    t_end
                } else {
                    t0 + (t_end - t0) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

/// Integrates through the given sample times (monotone in the direction of
/// integration, starting at or after `s0.t`).
pub fn integrate_at(s0: &PeakonState, times: &[f64], tol: f64) -> Result<Trajectory> {
    let states = integrate_states(s0, times, tol)?;
    Ok(Trajectory::from_states(states))
}

pub fn integrate_states(s0: &PeakonState, times: &[f64], tol: f64) -> Result<Vec<PeakonState>> {
    s0.validate()?;
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(PeakonError::Domain(format!("tolerance {tol} outside [1e-13, 1e-6]")));
    }
    if times.is_empty() {
        return Ok(vec![]);
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(PeakonError::Domain("sample times must be finite".into()));
    }
    let t_end = *times.last().unwrap();
    let dir = if t_end >= s0.t { 1.0 } else { -1.0 };
    if dir * (times[0] - s0.t) < 0.0 {
        return Err(PeakonError::Domain("sample times start before the initial time".into()));
    }
    if times.windows(2).any(|w| dir * (w[1] - w[0]) <= 0.0) {
        return Err(PeakonError::Domain("sample times must be strictly monotone".into()));
    }
    Dopri::new(s0, tol, dir).run(times)
}

// Dormand-Prince 5(4) tableau; the system is autonomous so the nodes c_i are not needed
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const BETA: f64 = 0.04;
const SAFE: f64 = 0.9;
const FAC1: f64 = 0.2;
const FAC2: f64 = 10.0;

struct Dopri {
    n: usize,
    tol: f64,
    dir: f64,
    t: f64,
    y: Vec<f64>,
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
}

impl Dopri {
    fn new(s0: &PeakonState, tol: f64, dir: f64) -> Self {
        let n = s0.len();
        let mut y = s0.q.clone();
        y.extend_from_slice(&s0.p);
        let zeros = vec![0.0; 2 * n];
        Self {
            n,
            tol,
            dir,
            t: s0.t,
            y,
            k: std::array::from_fn(|_| zeros.clone()),
            ytmp: zeros.clone(),
            ynew: zeros,
        }
    }

    fn eval(n: usize, y: &[f64], out: &mut [f64]) {
        let (q, p) = y.split_at(n);
        let (dq, dp) = out.split_at_mut(n);
        rhs_into(q, p, dq, dp);
    }

    fn admissible(n: usize, y: &[f64]) -> bool {
        let (q, p) = y.split_at(n);
        y.iter().all(|x| x.is_finite())
            && p.iter().all(|&x| x > 0.0)
            && q.windows(2).all(|w| w[1] - w[0] >= GAP_TOL)
    }

    fn closest_pair(&self) -> usize {
        let q = &self.y[..self.n];
        (0..self.n.saturating_sub(1))
            .min_by(|&i, &j| (q[i + 1] - q[i]).total_cmp(&(q[j + 1] - q[j])))
            .unwrap_or(0)
    }

    fn norm(&self, v: &[f64], scale_from: &[f64]) -> f64 {
        let m = v.len().max(1) as f64;
        let s: f64 = v
            .iter()
            .zip(scale_from)
            .map(|(x, y)| {
                let sk = self.tol + self.tol * y.abs();
                (x / sk).powi(2)
            })
            .sum();
        (s / m).sqrt()
    }

    fn initial_step(&mut self) -> f64 {
        let dim = 2 * self.n;
        Self::eval(self.n, &self.y, &mut self.k[0]);
        let d0 = self.norm(&self.y, &self.y);
        let d1 = self.norm(&self.k[0], &self.y);
        let h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
        for i in 0..dim {
            self.ytmp[i] = self.y[i] + self.dir * h0 * self.k[0][i];
        }
        let mut f1 = vec![0.0; dim];
        Self::eval(self.n, &self.ytmp, &mut f1);
        let diff: Vec<f64> = f1.iter().zip(&self.k[0]).map(|(a, b)| a - b).collect();
        let d2 = self.norm(&diff, &self.y) / h0;
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dm).powf(0.2)
        };
        (100.0 * h0).min(h1)
    }

    fn run(mut self, times: &[f64]) -> Result<Vec<PeakonState>> {
        let n = self.n;
        let dim = 2 * n;
        let mut out = Vec::with_capacity(times.len());
        let mut next = 0;
        let t_end = *times.last().unwrap();
        let push = |t: f64, y: &[f64], out: &mut Vec<PeakonState>| {
            out.push(PeakonState {
                t,
                q: y[..n].to_vec(),
                p: y[n..].to_vec(),
            })
        };
        while next < times.len() && times[next] == self.t {
            push(self.t, &self.y, &mut out);
            next += 1;
        }
        if next == times.len() || n == 0 {
            while next < times.len() {
                push(times[next], &self.y, &mut out);
                next += 1;
            }
            return Ok(out);
        }

        let mut h = self.initial_step();
        let mut facold: f64 = 1e-4;
        let mut last_rejected = false;
        let mut cont: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; dim]);
        let expo1 = 0.2 - BETA * 0.75;
        let mut steps = 0usize;

        while next < times.len() {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(PeakonError::Convergence(format!(
                    "more than {MAX_STEPS} steps before t = {t_end}"
                )));
            }
            if h < MIN_STEP {
                let i = self.closest_pair();
                return Err(PeakonError::NearCollision {
                    left: i,
                    right: i + 1,
                    time: self.t,
                });
            }
            let remaining = self.dir * (t_end - self.t);
            let mut last = false;
            if h >= remaining {
                h = remaining;
                last = true;
            }
            let hs = self.dir * h;

            let stages_ok = self.stages(hs);
            if !stages_ok {
                h *= 0.5;
                last_rejected = true;
                continue;
            }
            let mut errv = vec![0.0; dim];
            for i in 0..dim {
                errv[i] = hs
                    * (E1 * self.k[0][i]
                        + E3 * self.k[2][i]
                        + E4 * self.k[3][i]
                        + E5 * self.k[4][i]
                        + E6 * self.k[5][i]
                        + E7 * self.k[6][i]);
            }
            let m = dim as f64;
            let err = (errv
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let sk = self.tol + self.tol * self.y[i].abs().max(self.ynew[i].abs());
                    (e / sk).powi(2)
                })
                .sum::<f64>()
                / m)
                .sqrt();

            let fac11 = err.powf(expo1);
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(1.0 / FAC2, 1.0 / FAC1);
            if err <= 1.0 {
                facold = err.max(1e-4);
                // dense output
                for i in 0..dim {
                    let ydiff = self.ynew[i] - self.y[i];
                    let bspl = hs * self.k[0][i] - ydiff;
                    cont[0][i] = self.y[i];
                    cont[1][i] = ydiff;
                    cont[2][i] = bspl;
                    cont[3][i] = ydiff - hs * self.k[6][i] - bspl;
                    cont[4][i] = hs
                        * (D1 * self.k[0][i]
                            + D3 * self.k[2][i]
                            + D4 * self.k[3][i]
                            + D5 * self.k[4][i]
                            + D6 * self.k[5][i]
                            + D7 * self.k[6][i]);
                }
                let t_old = self.t;
                self.t = if last { t_end } else { t_old + hs };
                std::mem::swap(&mut self.y, &mut self.ynew);
                self.k.swap(0, 6);

                while next < times.len() && self.dir * (times[next] - self.t) <= 0.0 {
                    let tn = times[next];
                    if tn == self.t {
                        push(tn, &self.y, &mut out);
                    } else {
                        let theta = (tn - t_old) / hs;
                        let theta1 = 1.0 - theta;
                        let mut y = vec![0.0; dim];
                        for i in 0..dim {
                            y[i] = cont[0][i]
                                + theta
                                    * (cont[1][i]
                                        + theta1 * (cont[2][i] + theta * (cont[3][i] + theta1 * cont[4][i])));
                        }
                        if !Self::admissible(n, &y) {
                            return Err(PeakonError::NearCollision {
                                left: self.closest_pair(),
                                right: self.closest_pair() + 1,
                                time: tn,
                            });
                        }
                        push(tn, &y, &mut out);
                    }
                    next += 1;
                }
                let mut hnew = h / fac;
                if last_rejected {
                    hnew = hnew.min(h);
                }
                last_rejected = false;
                h = hnew;
            } else {
                h /= (fac11 / SAFE).min(1.0 / FAC1);
                last_rejected = true;
            }
        }
        Ok(out)
    }

    /// Computes k2..k7 and the 5th-order solution; false if a stage leaves
    /// the admissible set.
    fn stages(&mut self, h: f64) -> bool {
        let n = self.n;
        let dim = 2 * n;
        let rows: [(&[f64], usize); 6] = [
            (&[A21], 1),
            (&[A31, A32], 2),
            (&[A41, A42, A43], 3),
            (&[A51, A52, A53, A54], 4),
            (&[A61, A62, A63, A64, A65], 5),
            (&[A71, 0.0, A73, A74, A75, A76], 6),
        ];
        for (coeffs, stage) in rows {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, c) in coeffs.iter().enumerate() {
                    acc += c * self.k[j][i];
                }
                self.ytmp[i] = self.y[i] + h * acc;
            }
            if !Self::admissible(n, &self.ytmp) {
                return false;
            }
            Self::eval(n, &self.ytmp, &mut self.k[stage]);
        }
        self.ynew.copy_from_slice(&self.ytmp);
        true
    }
}
