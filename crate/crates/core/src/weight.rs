//! The monotone weight Ψ, its scaled translates and the partition of unity.
//!
//! Ψ(s) = e^s / 2 for s < -1/2, 1 - e^{-s} / 2 for s > 1/2, and the quintic
//! Hermite blend matching value, slope and curvature at both ends in between.
//! Ψ(-s) = 1 - Ψ(s).

use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{PeakonError, Result};
use crate::pwexp::{canonical_origin, eval_terms, interior_point, multiply_terms, ExpTerm, PiecewiseExp};
use crate::sum::CompensatedSum;

/// Smallest admissible scale K.
pub const MIN_SCALE: f64 = 4.0;
pub const CONSTRAINT_SAMPLES: usize = 10_000;
const GL_NODES: usize = 32;
const MAX_PANELS: usize = 8;

/// Coefficients of Ψ' = α + β s² + γ s⁴ on the blend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blend {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Blend {
    fn solve() -> Self {
        // a = Ψ'(1/2) = -Ψ''(1/2); Ψ(1/2) - Ψ(-1/2) = 1 - 2a
        let a = 0.5 * (-0.5f64).exp();
        let gamma = 30.0 - 95.0 * a;
        let beta = -a - 0.5 * gamma;
        let alpha = a - beta / 4.0 - gamma / 16.0;
        Self { alpha, beta, gamma }
    }
}

pub fn blend() -> &'static Blend {
    static BLEND: OnceLock<Blend> = OnceLock::new();
    BLEND.get_or_init(Blend::solve)
}

/// Ψ(s).
pub fn psi(s: f64) -> f64 {
    psi_derivative(s, 0)
}

/// Ψ((x - y) / K).
pub fn psi_scaled(x: f64, scale: f64, center: f64) -> f64 {
    psi((x - center) / scale)
}

/// n-th derivative of Ψ at s.
pub fn psi_derivative(s: f64, n: u32) -> f64 {
    if s < -0.5 {
        return 0.5 * s.exp();
    }
    if s > 0.5 {
        let tail = 0.5 * (-s).exp();
        return match n {
            0 => 1.0 - tail,
            _ if n % 2 == 1 => tail,
            _ => -tail,
        };
    }
    let Blend { alpha, beta, gamma } = *blend();
    let s2 = s * s;
    match n {
        0 => 0.5 + s * (alpha + s2 * (beta / 3.0 + s2 * gamma / 5.0)),
        1 => alpha + s2 * (beta + s2 * gamma),
        2 => s * (2.0 * beta + 4.0 * gamma * s2),
        3 => 2.0 * beta + 12.0 * gamma * s2,
        4 => 24.0 * gamma * s,
        5 => 24.0 * gamma,
        _ => 0.0,
    }
}

/// Outcome of the sampled constraint checks on Ψ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiConstraints {
    pub min_slope: f64,
    pub max_third_over_first: f64,
    pub max_left_ratio: f64,
    pub max_right_ratio: f64,
}

fn check_psi() -> std::result::Result<PsiConstraints, String> {
    let n = CONSTRAINT_SAMPLES;
    let mut out = PsiConstraints {
        min_slope: f64::INFINITY,
        max_third_over_first: 0.0,
        max_left_ratio: 0.0,
        max_right_ratio: 0.0,
    };
    for i in 0..n {
        let s = -20.0 + 40.0 * i as f64 / (n - 1) as f64;
        let v = psi(s);
        if !(v > 0.0 && v <= 1.0) {
            return Err(format!("psi({s}) = {v} outside (0, 1]"));
        }
        out.min_slope = out.min_slope.min(psi_derivative(s, 1));
    }
    if out.min_slope <= 0.0 {
        return Err(format!("psi is not increasing (min slope {})", out.min_slope));
    }
    for i in 0..n {
        let s = -0.5 + i as f64 / (n - 1) as f64;
        let ratio = psi_derivative(s, 3).abs() / psi_derivative(s, 1);
        out.max_third_over_first = out.max_third_over_first.max(ratio);
        let bound = 2.0 * (-s.abs()).exp();
        if s <= 0.0 {
            out.max_left_ratio = out.max_left_ratio.max(psi(s) / bound);
        }
        if s >= 0.0 {
            out.max_right_ratio = out.max_right_ratio.max((1.0 - psi(s)) / bound);
        }
    }
    if out.max_third_over_first > 10.0 {
        return Err(format!("|psi'''| / psi' reaches {} > 10 on the blend", out.max_third_over_first));
    }
    if out.max_left_ratio > 1.0 || out.max_right_ratio > 1.0 {
        return Err("psi violates the 2 exp(-|x|) envelope on the blend".into());
    }
    Ok(out)
}

/// Sampled constraint checks, computed once per process.
pub fn psi_constraints() -> Result<PsiConstraints> {
    static CHECK: OnceLock<std::result::Result<PsiConstraints, String>> = OnceLock::new();
    CHECK.get_or_init(check_psi).clone().map_err(PeakonError::Constraint)
}

/// Short description of the weight used, for report metadata.
pub fn psi_description() -> String {
    let b = blend();
    format!(
        "psi(s)=exp(s)/2 for s<-1/2, 1-exp(-s)/2 for s>1/2, quintic blend psi'(s)={:.17e}{:+.17e}s^2{:+.17e}s^4",
        b.alpha, b.beta, b.gamma
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    Unit,
    Psi { center: f64 },
    OneMinusPsi { center: f64 },
    PsiDifference { left: f64, right: f64 },
}

/// A weight built from scaled translates of Ψ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile", into = "RawProfile")]
pub struct WeightProfile {
    scale: f64,
    kind: WeightKind,
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq)]
#[serde(rename_all = "kebab-case")]
enum RawKind {
    Unit,
    Psi,
    OneMinusPsi,
    PsiDifference,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    scale: f64,
    kind: RawKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    right: Option<f64>,
}

impl TryFrom<RawProfile> for WeightProfile {
    type Error = PeakonError;
    fn try_from(raw: RawProfile) -> Result<Self> {
        let missing = |name: &str| PeakonError::Domain(format!("weight profile is missing `{name}`"));
        let kind = match raw.kind {
            RawKind::Unit => WeightKind::Unit,
            RawKind::Psi => WeightKind::Psi {
                center: raw.center.ok_or_else(|| missing("center"))?,
            },
            RawKind::OneMinusPsi => WeightKind::OneMinusPsi {
                center: raw.center.ok_or_else(|| missing("center"))?,
            },
            RawKind::PsiDifference => WeightKind::PsiDifference {
                left: raw.left.ok_or_else(|| missing("left"))?,
                right: raw.right.ok_or_else(|| missing("right"))?,
            },
        };
        let extra = match kind {
            WeightKind::Unit => raw.center.is_some() || raw.left.is_some() || raw.right.is_some(),
            WeightKind::Psi { .. } | WeightKind::OneMinusPsi { .. } => raw.left.is_some() || raw.right.is_some(),
            WeightKind::PsiDifference { .. } => raw.center.is_some(),
        };
        if extra {
            return Err(PeakonError::Domain("weight profile has fields that do not match its kind".into()));
        }
        Self::new(kind, raw.scale)
    }
}

impl From<WeightProfile> for RawProfile {
    fn from(w: WeightProfile) -> Self {
        let mut raw = RawProfile {
            scale: w.scale,
            kind: RawKind::Unit,
            center: None,
            left: None,
            right: None,
        };
        match w.kind {
            WeightKind::Unit => {}
            WeightKind::Psi { center } => {
                raw.kind = RawKind::Psi;
                raw.center = Some(center);
            }
            WeightKind::OneMinusPsi { center } => {
                raw.kind = RawKind::OneMinusPsi;
                raw.center = Some(center);
            }
            WeightKind::PsiDifference { left, right } => {
                raw.kind = RawKind::PsiDifference;
                raw.left = Some(left);
                raw.right = Some(right);
            }
        }
        raw
    }
}

#[derive(Debug, Clone, Copy)]
struct Bump {
    sign: f64,
    center: f64,
}

impl WeightProfile {
    pub fn new(kind: WeightKind, scale: f64) -> Result<Self> {
        psi_constraints()?;
        if !(scale.is_finite() && scale >= MIN_SCALE) {
            return Err(PeakonError::Constraint(format!("K must be >= {MIN_SCALE}, got {scale}")));
        }
        let finite = match kind {
            WeightKind::Unit => true,
            WeightKind::Psi { center } | WeightKind::OneMinusPsi { center } => center.is_finite(),
            WeightKind::PsiDifference { left, right } => {
                if left.is_finite() && right.is_finite() && left >= right {
                    return Err(PeakonError::Constraint("psi-difference needs left < right".into()));
                }
                left.is_finite() && right.is_finite()
            }
        };
        if !finite {
            return Err(PeakonError::Domain("weight centers must be finite".into()));
        }
        Ok(Self { scale, kind })
    }

    pub fn unit() -> Self {
        Self {
            scale: MIN_SCALE,
            kind: WeightKind::Unit,
        }
    }

    pub fn psi(center: f64, scale: f64) -> Result<Self> {
        Self::new(WeightKind::Psi { center }, scale)
    }

    pub fn one_minus_psi(center: f64, scale: f64) -> Result<Self> {
        Self::new(WeightKind::OneMinusPsi { center }, scale)
    }

    pub fn psi_difference(left: f64, right: f64, scale: f64) -> Result<Self> {
        Self::new(WeightKind::PsiDifference { left, right }, scale)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    fn constant(&self) -> f64 {
        match self.kind {
            WeightKind::Unit | WeightKind::OneMinusPsi { .. } => 1.0,
            _ => 0.0,
        }
    }

    fn bumps(&self) -> Vec<Bump> {
        match self.kind {
            WeightKind::Unit => vec![],
            WeightKind::Psi { center } => vec![Bump { sign: 1.0, center }],
            WeightKind::OneMinusPsi { center } => vec![Bump { sign: -1.0, center }],
            WeightKind::PsiDifference { left, right } => vec![
                Bump {
                    sign: 1.0,
                    center: left,
                },
                Bump {
                    sign: -1.0,
                    center: right,
                },
            ],
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    /// n-th x-derivative.
    pub fn derivative(&self, x: f64, n: u32) -> f64 {
        let k = self.scale;
        let factor = k.powi(-(n as i32));
        let mut acc = if n == 0 { self.constant() } else { 0.0 };
        for b in self.bumps() {
            acc += b.sign * factor * psi_derivative((x - b.center) / k, n);
        }
        acc
    }

    /// Intervals `[y - K/2, y + K/2]` where the weight is not a sum of exponentials.
    pub fn blends(&self) -> Vec<(f64, f64)> {
        let h = 0.5 * self.scale;
        self.bumps().iter().map(|b| (b.center - h, b.center + h)).collect()
    }

    fn in_blend(&self, a: f64, b: f64) -> bool {
        self.blends().iter().any(|&(lo, hi)| a >= lo && b <= hi)
    }

    /// Exponential terms of the n-th derivative on `[a, b]`, which must not
    /// overlap any blend interior.
    fn terms_on(&self, a: f64, b: f64, n: u32) -> Vec<ExpTerm> {
        let k = self.scale;
        let probe = interior_point(a, b);
        let factor = k.powi(-(n as i32));
        let mut out = Vec::new();
        let c = if n == 0 { self.constant() } else { 0.0 };
        let mut constant = c;
        for bump in self.bumps() {
            let (coef, rate) = if probe < bump.center {
                (0.5, 1.0 / k)
            } else {
                if n == 0 {
                    constant += bump.sign;
                }
                let sign = match n {
                    0 => -1.0,
                    _ if n % 2 == 1 => 1.0,
                    _ => -1.0,
                };
                (0.5 * sign, -1.0 / k)
            };
            // re-anchor at the canonical end so coefficients stay bounded
            let origin = canonical_origin(a, b, rate);
            let coef = bump.sign * factor * coef * (rate * (origin - bump.center)).exp();
            out.push(ExpTerm::new(coef, rate, origin));
        }
        if constant != 0.0 {
            out.push(ExpTerm::new(constant, 0.0, canonical_origin(a, b, 0.0)));
        }
        out
    }

    /// `int_R f(x) w^{(n)}(x) dx`, exact away from blends and by composite
    /// Gauss-Legendre on them.
    pub fn integrate(&self, f: &PiecewiseExp, n: u32) -> f64 {
        let mut cuts = f.breakpoints();
        for (lo, hi) in self.blends() {
            cuts.push(lo);
            cuts.push(hi);
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut bounds = Vec::with_capacity(cuts.len() + 2);
        bounds.push(f64::NEG_INFINITY);
        bounds.extend(cuts);
        bounds.push(f64::INFINITY);

        let mut acc = CompensatedSum::new();
        for w in bounds.windows(2) {
            let (a, b) = (w[0], w[1]);
            let piece = &f.pieces()[f.piece_index(interior_point(a, b))];
            if piece.terms.is_empty() {
                continue;
            }
            let terms = piece.restricted(a, b);
            if self.in_blend(a, b) {
                let panels = ((MAX_PANELS as f64 * (b - a) / self.scale).ceil() as usize).clamp(1, MAX_PANELS);
                let h = (b - a) / panels as f64;
                for j in 0..panels {
                    let lo = a + j as f64 * h;
                    let hi = if j + 1 == panels { b } else { lo + h };
                    acc.add(gauss_legendre().integrate(lo, hi, |x| {
                        eval_terms(&terms, x) * self.derivative(x, n)
                    }));
                }
            } else {
                let weight = self.terms_on(a, b, n);
                if weight.is_empty() {
                    continue;
                }
                for t in multiply_terms(&terms, &weight, a, b) {
                    acc.add(t.integral(a, b));
                }
            }
        }
        acc.value()
    }
}

fn gauss_legendre() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(GL_NODES).expect("32-point Gauss-Legendre rule"))
}

/// Partition of unity from the interior cut points y₂ < … < y_N.
pub fn partition(cuts: &[f64], scale: f64) -> Result<Vec<WeightProfile>> {
    if !(scale.is_finite() && scale >= MIN_SCALE) {
        return Err(PeakonError::Constraint(format!("K must be >= {MIN_SCALE}, got {scale}")));
    }
    if cuts.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(PeakonError::Constraint("partition points must be strictly increasing".into()));
    }
    if cuts.is_empty() {
        return Ok(vec![WeightProfile::unit()]);
    }
    let n = cuts.len() + 1;
    let mut out = Vec::with_capacity(n);
    out.push(WeightProfile::one_minus_psi(cuts[0], scale)?);
    for w in cuts.windows(2) {
        out.push(WeightProfile::psi_difference(w[0], w[1], scale)?);
    }
    out.push(WeightProfile::psi(cuts[n - 2], scale)?);
    Ok(out)
}

/// K = max(4, sqrt(L) / 8).
pub fn default_scale(spacing: f64) -> f64 {
    (spacing.sqrt() / 8.0).max(MIN_SCALE)
}

/// σ₀ = min(c₁, c₂ - c₁, …) / 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigma0 {
    pub value: f64,
}

impl Sigma0 {
    pub fn from_speeds(speeds: &[f64]) -> Result<Self> {
        if speeds.is_empty() {
            return Err(PeakonError::Constraint("no speeds".into()));
        }
        let mut m = speeds[0];
        for w in speeds.windows(2) {
            m = m.min(w[1] - w[0]);
        }
        if !(m > 0.0) {
            return Err(PeakonError::Constraint("speeds must be positive and strictly increasing".into()));
        }
        Ok(Self { value: 0.25 * m })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn branch_values() {
        let e = std::f64::consts::E;
        assert_relative_eq!(psi(-1.0), 0.5 / e, max_relative = 1e-15);
        assert_relative_eq!(psi(1.0), 1.0 - 0.5 / e, max_relative = 1e-15);
        assert_relative_eq!(psi(-0.5), 0.5 * (-0.5f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(psi(0.5), 1.0 - 0.5 * (-0.5f64).exp(), max_relative = 1e-14);
        assert_eq!(psi(0.0), 0.5);
    }

    #[test]
    fn blend_is_c2_at_both_ends() {
        let eps = 1e-12;
        for &s in &[-0.5f64, 0.5] {
            for n in 0..=2 {
                let inner = psi_derivative(s - s.signum() * eps, n);
                let outer = psi_derivative(s + s.signum() * eps, n);
                assert!((inner - outer).abs() < 1e-10, "order {n} at {s}: {inner} vs {outer}");
            }
        }
    }

    #[test]
    fn constraints_hold() {
        let c = psi_constraints().unwrap();
        assert!(c.min_slope > 0.0);
        assert!(c.max_third_over_first <= 10.0);
        assert!(c.max_third_over_first > 5.0);
    }

    #[test]
    fn odd_symmetry() {
        for i in 0..200 {
            let s = -3.0 + 0.03 * i as f64;
            assert!((psi(-s) - (1.0 - psi(s))).abs() < 1e-15);
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let w = WeightProfile::psi_difference(-1.0, 7.0, 4.5).unwrap();
        for &x in &[-9.0, -2.0, -0.5, 0.7, 3.0, 6.0, 8.0, 15.0] {
            for n in 0..3 {
                let h = 1e-5;
                let fd = (w.derivative(x + h, n) - w.derivative(x - h, n)) / (2.0 * h);
                assert_relative_eq!(w.derivative(x, n + 1), fd, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn small_scale_rejected() {
        assert!(matches!(partition(&[0.0], 2.0), Err(PeakonError::Constraint(_))));
        assert!(WeightProfile::psi(0.0, 3.99).is_err());
    }

    #[test]
    fn partition_single_is_unit() {
        let p = partition(&[], 5.0).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].value(123.0), 1.0);
    }

    #[test]
    fn sigma0_example() {
        assert_eq!(Sigma0::from_speeds(&[1.0, 2.0]).unwrap().value, 0.25);
        assert_eq!(Sigma0::from_speeds(&[1.0, 1.5, 3.0]).unwrap().value, 0.125);
        assert!(Sigma0::from_speeds(&[2.0, 1.0]).is_err());
    }

    #[test]
    fn default_scale_floor() {
        assert_eq!(default_scale(400.0), 4.0);
        assert_eq!(default_scale(6400.0), 10.0);
    }

    #[test]
    fn profile_json_roundtrip() {
        let w = WeightProfile::psi_difference(-2.0, 3.0, 5.0).unwrap();
        let s = serde_json::to_string(&w).unwrap();
        assert_eq!(s, r#"{"scale":5.0,"kind":"psi-difference","left":-2.0,"right":3.0}"#);
        let back: WeightProfile = serde_json::from_str(&s).unwrap();
        assert_eq!(back, w);
        assert!(serde_json::from_str::<WeightProfile>(r#"{"scale":1.0,"kind":"unit"}"#).is_err());
    }
}
