//! Peakon trains and their multipeakon perturbations.

use serde::{Deserialize, Serialize};

use crate::dynamics::{PeakonState, GAP_TOL};
use crate::error::{PeakonError, Result};
use crate::experiments::rng::SplitMix64;
use crate::experiments::tracking::min_shift_distance;
use crate::field::PeakedField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroPeakon {
    pub position: f64,
    pub amp: f64,
}

/// Direction of the initial perturbation. Amplitudes of the train become
/// c_j (1 + s amp_j), nodes z_j + s node_j, and micro-peakons get amplitude
/// s amp; the size s is then tuned to the requested initial distance.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    #[serde(default)]
    pub amp: Vec<f64>,
    #[serde(default)]
    pub node: Vec<f64>,
    #[serde(default)]
    pub micro: Vec<MicroPeakon>,
    /// Draw amp and node directions from the seed.
    #[serde(default)]
    pub random: bool,
    /// Extra micro-peakons at seeded positions inside the train.
    #[serde(default)]
    pub random_micro: usize,
}

impl Perturbation {
    pub fn is_randomized(&self) -> bool {
        self.random || self.random_micro > 0
    }

    /// Randomized directions with one micro-peakon per gap.
    pub fn seeded(n: usize) -> Self {
        Self {
            random: true,
            random_micro: n.saturating_sub(1).max(1),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    pub speeds: Vec<f64>,
    /// Initial centers; defaults to 0, L, 2L, ….
    #[serde(default)]
    pub shifts: Option<Vec<f64>>,
    pub spacing: f64,
    #[serde(default)]
    pub perturbation: Perturbation,
    #[serde(default)]
    pub seed: u64,
}

impl TrainSpec {
    pub fn new(speeds: Vec<f64>, spacing: f64) -> Self {
        Self {
            speeds,
            shifts: None,
            spacing,
            perturbation: Perturbation::default(),
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.is_empty()
    }

    pub fn centers(&self) -> Vec<f64> {
        match &self.shifts {
            Some(z) => z.clone(),
            None => (0..self.len()).map(|j| j as f64 * self.spacing).collect(),
        }
    }

    /// Every violated precondition, in order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.len();
        if n == 0 {
            out.push("at least one speed is required".to_string());
        }
        if self.speeds.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            out.push("speeds must be positive".to_string());
        }
        if self.speeds.windows(2).any(|w| !(w[0] < w[1])) {
            out.push("speeds must be strictly increasing".to_string());
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            out.push("spacing L must be positive".to_string());
        }
        if let Some(z) = &self.shifts {
            if z.len() != n {
                out.push(format!("{} shifts for {} speeds", z.len(), n));
            } else if z.windows(2).any(|w| !(w[1] - w[0] >= self.spacing)) {
                out.push("consecutive shifts must be at least L apart".to_string());
            }
        }
        let p = &self.perturbation;
        if !p.amp.is_empty() && p.amp.len() != n {
            out.push(format!("{} amplitude directions for {} speeds", p.amp.len(), n));
        }
        if !p.node.is_empty() && p.node.len() != n {
            out.push(format!("{} node directions for {} speeds", p.node.len(), n));
        }
        if p.random && (!p.amp.is_empty() || !p.node.is_empty()) {
            out.push("random perturbation excludes explicit amp/node directions".to_string());
        }
        if p.micro.iter().any(|m| !(m.amp > 0.0 && m.position.is_finite())) {
            out.push("micro-peakons need positive amplitudes".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(PeakonError::Constraint(v.join("; ")))
        }
    }

    /// The perturbation direction with seeded parts resolved.
    pub fn resolved(&self) -> Perturbation {
        let n = self.len();
        let mut p = self.perturbation.clone();
        let mut rng = SplitMix64::new(self.seed);
        if p.random {
            p.amp = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            p.node = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        }
        let z = self.centers();
        let (lo, hi) = (z[0] - 0.5 * self.spacing, z[n - 1] + 0.5 * self.spacing);
        for _ in 0..p.random_micro {
            // keep micro-peakons a unit away from the crests
            let position = loop {
                let x = rng.uniform(lo, hi);
                if z.iter().all(|zj| (x - zj).abs() > 1.0) {
                    break x;
                }
            };
            p.micro.push(MicroPeakon {
                position,
                amp: rng.uniform(0.1, 1.0),
            });
        }
        p.random = false;
        p.random_micro = 0;
        p
    }

    pub fn train(&self) -> Result<PeakedField> {
        PeakedField::train(&self.speeds, &self.centers())
    }

    /// Initial field for perturbation size s.
    pub fn perturbed(&self, dir: &Perturbation, s: f64) -> Result<PeakedField> {
        let z = self.centers();
        let mut amps = Vec::with_capacity(self.len() + dir.micro.len());
        let mut nodes = Vec::with_capacity(amps.capacity());
        for (j, c) in self.speeds.iter().enumerate() {
            amps.push(c * (1.0 + s * dir.amp.get(j).copied().unwrap_or(0.0)));
            nodes.push(z[j] + s * dir.node.get(j).copied().unwrap_or(0.0));
        }
        if s > 0.0 {
            for m in &dir.micro {
                amps.push(s * m.amp);
                nodes.push(m.position);
            }
        }
        let u = PeakedField::new(amps, nodes)?;
        if !u.all_positive() {
            return Err(PeakonError::Constraint("perturbation makes an amplitude non-positive".into()));
        }
        if u.nodes().windows(2).any(|w| w[1] - w[0] < GAP_TOL) {
            return Err(PeakonError::Constraint("perturbation puts two nodes too close".into()));
        }
        Ok(u)
    }

    /// Perturbed initial data whose shift-minimized distance to the train is
    /// `target`.
    pub fn initial_data(&self, target: f64) -> Result<InitialData> {
        self.validate()?;
        let dir = self.resolved();
        let z = self.centers();
        let dist = |s: f64| -> Result<f64> {
            let u = self.perturbed(&dir, s)?;
            Ok(min_shift_distance(&u, &self.speeds, &z)?.distance)
        };
        if target == 0.0 {
            let u = self.perturbed(&dir, 0.0)?;
            return Ok(InitialData { field: u, size: 0.0, distance: 0.0 });
        }
        if !(target > 0.0 && target.is_finite()) {
            return Err(PeakonError::Domain(format!("target distance {target} must be positive")));
        }
        let probe = 1e-3;
        let d_probe = dist(probe)?;
        if !(d_probe > 0.0) {
            return Err(PeakonError::Constraint("perturbation direction leaves the train unchanged".into()));
        }
        // secant on s -> d(s) - target, starting from the linear estimate
        let (mut s0, mut d0) = (probe, d_probe);
        let mut s1 = target * probe / d_probe;
        let mut d1 = dist(s1)?;
        for _ in 0..30 {
            if (d1 - target).abs() <= 1e-9 * target {
                break;
            }
            let slope = (d1 - d0) / (s1 - s0);
            if !(slope.is_finite() && slope > 0.0) {
                break;
            }
            let s2 = s1 + (target - d1) / slope;
            (s0, d0) = (s1, d1);
            s1 = s2;
            d1 = dist(s1)?;
        }
        if (d1 - target).abs() > 1e-6 * target {
            return Err(PeakonError::Convergence(format!(
                "could not size the perturbation: d = {d1}, target {target}"
            )));
        }
        Ok(InitialData {
            field: self.perturbed(&dir, s1)?,
            size: s1,
            distance: d1,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub field: PeakedField,
    pub size: f64,
    pub distance: f64,
}

impl InitialData {
    pub fn state(&self) -> Result<PeakonState> {
        PeakonState::new(0.0, self.field.amps().to_vec(), self.field.nodes().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn violations_listed() {
        let mut spec = TrainSpec::new(vec![2.0, 1.0], -1.0);
        spec.shifts = Some(vec![0.0]);
        let v = spec.violations();
        assert!(v.iter().any(|m| m.contains("increasing")));
        assert!(v.iter().any(|m| m.contains("spacing")));
        assert!(v.iter().any(|m| m.contains("shifts")));
    }

    #[test]
    fn sized_to_target() {
        let mut spec = TrainSpec::new(vec![1.0, 2.0], 50.0);
        spec.perturbation = Perturbation::seeded(2);
        spec.seed = 11;
        let init = spec.initial_data(1e-4).unwrap();
        assert!((init.distance - 1e-4).abs() <= 1e-10);
        assert!(init.field.all_positive());
        assert_eq!(init.field.len(), 3);
        let again = spec.initial_data(1e-4).unwrap();
        assert_eq!(init, again);
    }

    #[test]
    fn unperturbed() {
        let spec = TrainSpec::new(vec![1.0, 2.0], 50.0);
        let init = spec.initial_data(0.0).unwrap();
        assert_eq!(init.field, spec.train().unwrap());
    }
}
