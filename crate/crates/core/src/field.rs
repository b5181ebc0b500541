//! Peaked fields `u(x) = sum_i a_i exp(-|x - r_i|)` and their exact H^1 algebra.
//!
//! Every object the experiments handle (solutions on the multipeakon manifold,
//! reference trains, and differences of the two) is a finite signed peakon
//! combination, so inner products reduce to Gram sums of the kernel
//! `<e^{-|.-r|}, e^{-|.-s|}>_{H^1} = 2 e^{-|r-s|}`.

use serde::{Deserialize, Serialize};

use crate::error::{PeakonError, Result};
use crate::sum::CompensatedSum;

/// Nodes closer than this are merged on construction.
pub const NODE_MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawField", into = "RawField")]
pub struct PeakedField {
    amps: Vec<f64>,
    nodes: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    amps: Vec<f64>,
    nodes: Vec<f64>,
}

impl TryFrom<RawField> for PeakedField {
    type Error = PeakonError;

    fn try_from(raw: RawField) -> Result<Self> {
        PeakedField::new(raw.amps, raw.nodes)
    }
}

impl From<PeakedField> for RawField {
    fn from(f: PeakedField) -> Self {
        RawField {
            amps: f.amps,
            nodes: f.nodes,
        }
    }
}

impl PeakedField {
    /// Builds a field from amplitude/node pairs. Nodes need not be sorted;
    /// nodes within [`NODE_MERGE_TOL`] of each other are merged and their
    /// amplitudes summed.
    pub fn new(amps: Vec<f64>, nodes: Vec<f64>) -> Result<Self> {
        if amps.len() != nodes.len() {
            return Err(PeakonError::Domain(format!(
                "{} amplitudes for {} nodes",
                amps.len(),
                nodes.len()
            )));
        }
        if let Some(i) = amps.iter().position(|a| !a.is_finite()) {
            return Err(PeakonError::Domain(format!("amplitude {i} is not finite")));
        }
        if let Some(i) = nodes.iter().position(|r| !r.is_finite()) {
            return Err(PeakonError::Domain(format!("node {i} is not finite")));
        }
        let mut pairs: Vec<(f64, f64)> = nodes.into_iter().zip(amps).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut out_nodes: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut out_amps: Vec<f64> = Vec::with_capacity(pairs.len());
        for (r, a) in pairs {
            match out_nodes.last() {
                Some(&last) if r - last < NODE_MERGE_TOL => {
                    *out_amps.last_mut().unwrap() += a;
                }
                _ => {
                    out_nodes.push(r);
                    out_amps.push(a);
                }
            }
        }
        Ok(Self {
            amps: out_amps,
            nodes: out_nodes,
        })
    }

    pub fn zero() -> Self {
        Self {
            amps: Vec::new(),
            nodes: Vec::new(),
        }
    }

    /// The peakon `c exp(-|x - z|)`.
    pub fn peakon(c: f64, z: f64) -> Result<Self> {
        Self::new(vec![c], vec![z])
    }

    /// Sum of peakons `sum_j c_j exp(-|x - z_j|)`.
    pub fn train(speeds: &[f64], positions: &[f64]) -> Result<Self> {
        Self::new(speeds.to_vec(), positions.to_vec())
    }

    pub fn amps(&self) -> &[f64] {
        &self.amps
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.amps.iter().copied().zip(self.nodes.iter().copied())
    }

    pub fn all_positive(&self) -> bool {
        self.amps.iter().all(|&a| a > 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            amps: self.amps.iter().map(|a| a * factor).collect(),
            nodes: self.nodes.clone(),
        }
    }

    /// Joint field `self + factor * other`, merging coincident nodes.
    pub fn axpy(&self, factor: f64, other: &PeakedField) -> Self {
        let mut amps = self.amps.clone();
        let mut nodes = self.nodes.clone();
        amps.extend(other.amps.iter().map(|b| factor * b));
        nodes.extend_from_slice(&other.nodes);
        Self::new(amps, nodes).expect("finite inputs stay finite")
    }

    pub fn difference(&self, other: &PeakedField) -> Self {
        self.axpy(-1.0, other)
    }

    /// `u(x)` for finite `x`; see [`PeakedField::eval`] for the checked form.
    pub fn value(&self, x: f64) -> f64 {
        self.iter()
            .map(|(a, r)| a * (-(x - r).abs()).exp())
            .collect::<CompensatedSum>()
            .value()
    }

    /// Almost-everywhere derivative with `sgn(0) = 0`: at a node, that
    /// peakon's own contribution is dropped.
    pub fn slope(&self, x: f64) -> f64 {
        self.iter()
            .map(|(a, r)| -a * sign0(x - r) * (-(x - r).abs()).exp())
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_finite(x)?;
        Ok(self.value(x))
    }

    pub fn eval_dx(&self, x: f64) -> Result<f64> {
        check_finite(x)?;
        Ok(self.slope(x))
    }

    /// Maximum of the field over the real line. For a nonnegative combination
    /// the maximum sits at a node (the field is convex between nodes).
    pub fn max_at_nodes(&self) -> Option<(f64, f64)> {
        self.nodes
            .iter()
            .map(|&r| (r, self.value(r)))
            .fold(None, |best, (r, v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((r, v)),
            })
    }

    pub fn segments(&self) -> SegmentForm {
        SegmentForm::from_field(self)
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(PeakonError::Domain(format!("evaluation point {x} is not finite")))
    }
}

#[inline]
pub(crate) fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `int u v + u_x v_x dx = 2 sum_ij a_i b_j exp(-|r_i - s_j|)`.
pub fn h1_inner(u: &PeakedField, v: &PeakedField) -> f64 {
    let mut acc = CompensatedSum::new();
    for (a, r) in u.iter() {
        for (b, s) in v.iter() {
            acc.add(2.0 * a * b * (-(r - s).abs()).exp());
        }
    }
    acc.value()
}

/// `||u - v||_{H^1}` through the Gram form of the merged difference field.
pub fn h1_dist(u: &PeakedField, v: &PeakedField) -> f64 {
    let w = u.difference(v);
    h1_inner(&w, &w).max(0.0).sqrt()
}

/// One interval of a [`SegmentForm`]: on `(lo, hi)` the field equals
/// `a exp(x - shift) + b exp(-(x - shift))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub shift: f64,
    pub a: f64,
    pub b: f64,
}

impl Segment {
    pub fn value(&self, x: f64) -> f64 {
        let t = x - self.shift;
        self.a * t.exp() + self.b * (-t).exp()
    }

    pub fn slope(&self, x: f64) -> f64 {
        let t = x - self.shift;
        self.a * t.exp() - self.b * (-t).exp()
    }
}

/// Piecewise `A e^x + B e^{-x}` decomposition between consecutive nodes,
/// including the two unbounded end intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentForm {
    pub breakpoints: Vec<f64>,
    pub segments: Vec<Segment>,
}

impl SegmentForm {
    pub fn from_field(field: &PeakedField) -> Self {
        let nodes = field.nodes();
        let amps = field.amps();
        let n = nodes.len();
        if n == 0 {
            return Self {
                breakpoints: Vec::new(),
                segments: Vec::new(),
            };
        }
        let mut segments = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let lo = if k == 0 { f64::NEG_INFINITY } else { nodes[k - 1] };
            let hi = if k == n { f64::INFINITY } else { nodes[k] };
            let shift = if k == 0 { nodes[0] } else { nodes[k - 1] };
            // nodes right of the interval feed the growing part, nodes left of it the decaying part
            let a = (k..n)
                .map(|i| amps[i] * (shift - nodes[i]).exp())
                .collect::<CompensatedSum>()
                .value();
            let b = (0..k)
                .map(|i| amps[i] * (nodes[i] - shift).exp())
                .collect::<CompensatedSum>()
                .value();
            segments.push(Segment { lo, hi, shift, a, b });
        }
        Self {
            breakpoints: nodes.to_vec(),
            segments,
        }
    }

    pub fn segment_at(&self, x: f64) -> Option<&Segment> {
        self.segments.iter().find(|s| x >= s.lo && x <= s.hi)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.segment_at(x).map_or(0.0, |s| s.value(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_peakon_kink_value() {
        let u = PeakedField::peakon(1.0, 3.0).unwrap();
        assert_eq!(u.eval(3.0).unwrap(), 1.0);
    }

    #[test]
    fn two_peakons_midpoint_value() {
        let d = 1.7;
        let u = PeakedField::new(vec![1.0, 1.0], vec![0.0, d]).unwrap();
        assert_relative_eq!(u.eval(d / 2.0).unwrap(), 2.0 * (-d / 2.0).exp(), max_relative = 1e-15);
    }

    #[test]
    fn scaled_peakon_at_ln2() {
        let u = PeakedField::peakon(2.0, 0.0).unwrap();
        assert_relative_eq!(u.eval(2f64.ln()).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn eval_rejects_non_finite_points() {
        let u = PeakedField::peakon(1.0, 0.0).unwrap();
        assert!(matches!(u.eval(f64::NAN), Err(PeakonError::Domain(_))));
        assert!(matches!(u.eval_dx(f64::INFINITY), Err(PeakonError::Domain(_))));
    }

    #[test]
    fn derivative_conventions() {
        let u = PeakedField::peakon(1.0, 0.5).unwrap();
        assert_eq!(u.eval_dx(0.5).unwrap(), 0.0);
        assert_relative_eq!(u.eval_dx(1.5).unwrap(), -(-1f64).exp(), max_relative = 1e-15);
        let d = 2.3;
        let w = PeakedField::new(vec![1.0, 1.0], vec![-d / 2.0, d / 2.0]).unwrap();
        assert_eq!(w.eval_dx(0.0).unwrap(), 0.0);
    }

    #[test]
    fn close_nodes_are_merged() {
        let u = PeakedField::new(vec![1.0, 2.0, 0.5], vec![1.0, 1.0 + 1e-13, -4.0]).unwrap();
        assert_eq!(u.nodes(), &[-4.0, 1.0]);
        assert_eq!(u.amps(), &[0.5, 3.0]);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(PeakedField::new(vec![1.0], vec![]).is_err());
        assert!(PeakedField::new(vec![f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    fn single_peakon_segments() {
        let c = 1.5;
        let q = -2.0;
        let s = PeakedField::peakon(c, q).unwrap().segments();
        assert_eq!(s.segments.len(), 2);
        let left = s.segments[0];
        let right = s.segments[1];
        assert_eq!((left.a, left.b, left.shift), (c, 0.0, q));
        assert_eq!((right.a, right.b, right.shift), (0.0, c, q));
    }

    #[test]
    fn empty_field_has_no_segments() {
        let s = PeakedField::zero().segments();
        assert!(s.segments.is_empty());
        assert_eq!(s.value(1.0), 0.0);
    }

    #[test]
    fn two_peakon_middle_segment_matches_eval() {
        let u = PeakedField::new(vec![1.3, 0.4], vec![-0.7, 2.1]).unwrap();
        let s = u.segments();
        let mid = 0.5 * (-0.7 + 2.1);
        assert_relative_eq!(s.segments[1].value(mid), u.value(mid), max_relative = 1e-14);
        assert_eq!(s.segments[0].b, 0.0);
        assert_eq!(s.segments[2].a, 0.0);
    }

    #[test]
    fn peakon_energy_is_two_c_squared() {
        let u = PeakedField::peakon(3.0, 0.2).unwrap();
        assert_relative_eq!(h1_inner(&u, &u), 18.0, max_relative = 1e-15);
    }

    #[test]
    fn distance_between_shifted_unit_peakons() {
        let d = 0.8;
        let u = PeakedField::peakon(1.0, 0.0).unwrap();
        let v = PeakedField::peakon(1.0, d).unwrap();
        assert_relative_eq!(h1_dist(&u, &v), (4.0 - 4.0 * (-d).exp()).sqrt(), max_relative = 1e-14);
        assert_eq!(h1_dist(&u, &u), 0.0);
    }

    #[test]
    fn json_shape() {
        let u = PeakedField::new(vec![1.0, 2.0], vec![0.0, 5.0]).unwrap();
        let s = serde_json::to_string(&u).unwrap();
        assert_eq!(s, r#"{"amps":[1.0,2.0],"nodes":[0.0,5.0]}"#);
        let back: PeakedField = serde_json::from_str(&s).unwrap();
        assert_eq!(back, u);
        assert!(serde_json::from_str::<PeakedField>(r#"{"amps":[1.0],"nodes":[]}"#).is_err());
        assert!(serde_json::from_str::<PeakedField>(r#"{"amps":[],"nodes":[],"x":1}"#).is_err());
    }
}
