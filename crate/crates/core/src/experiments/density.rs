//! Peakon approximation of a nonnegative momentum density m₀.

use serde::{Deserialize, Serialize};

use crate::dynamics::{PeakonState, GAP_TOL};
use crate::error::{PeakonError, Result};
use crate::field::h1_inner;
use crate::pwexp::{ExpTerm, Piece, PiecewiseExp};
use crate::sum::CompensatedSum;

/// Points per standard deviation when sampling Gaussian components.
const GAUSSIAN_RESOLUTION: f64 = 200.0;
const GAUSSIAN_WIDTH: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Component {
    Box { lo: f64, hi: f64, mass: f64 },
    Gaussian { mean: f64, sd: f64, mass: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Density {
    /// Samples m(x_k); the density is the trapezoid value (m_k + m_{k+1}) / 2
    /// on each [x_k, x_{k+1}].
    Grid { x: Vec<f64>, m: Vec<f64> },
    Mixture { components: Vec<Component> },
}

/// Piecewise-constant density with values on [breaks[k], breaks[k+1]].
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl Histogram {
    pub fn mass(&self) -> f64 {
        self.values
            .iter()
            .zip(self.breaks.windows(2))
            .map(|(v, w)| v * (w[1] - w[0]))
            .collect::<CompensatedSum>()
            .value()
    }

    /// m₀ as a piecewise exponential (constant pieces, zero outside).
    pub fn to_pwexp(&self) -> PiecewiseExp {
        let mut pieces = Vec::with_capacity(self.values.len() + 2);
        let first = self.breaks[0];
        let last = *self.breaks.last().unwrap();
        pieces.push(Piece {
            lo: f64::NEG_INFINITY,
            hi: first,
            terms: vec![],
        });
        for (v, w) in self.values.iter().zip(self.breaks.windows(2)) {
            pieces.push(Piece {
                lo: w[0],
                hi: w[1],
                terms: if *v == 0.0 { vec![] } else { vec![ExpTerm::new(*v, 0.0, w[0])] },
            });
        }
        pieces.push(Piece {
            lo: last,
            hi: f64::INFINITY,
            terms: vec![],
        });
        PiecewiseExp::from_pieces(pieces).expect("histogram pieces are contiguous")
    }
}

impl Density {
    pub fn histogram(&self) -> Result<Histogram> {
        match self {
            Density::Grid { x, m } => {
                if x.len() != m.len() || x.len() < 2 {
                    return Err(PeakonError::Domain("grid needs matching x and m with at least two samples".into()));
                }
                if x.windows(2).any(|w| !(w[0] < w[1])) || x.iter().any(|v| !v.is_finite()) {
                    return Err(PeakonError::Domain("grid points must be finite and increasing".into()));
                }
                if m.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(PeakonError::Domain("density samples must be nonnegative".into()));
                }
                Ok(Histogram {
                    breaks: x.clone(),
                    values: m.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
                })
            }
            Density::Mixture { components } => mixture_histogram(components),
        }
    }
}

fn mixture_histogram(components: &[Component]) -> Result<Histogram> {
    if components.is_empty() {
        return Err(PeakonError::Domain("empty mixture".into()));
    }
    // every component becomes (breaks, values); then all are summed on the union grid
    let mut parts: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for c in components {
        match *c {
            Component::Box { lo, hi, mass } => {
                if !(lo < hi && lo.is_finite() && hi.is_finite() && mass >= 0.0 && mass.is_finite()) {
                    return Err(PeakonError::Domain("box needs lo < hi and nonnegative mass".into()));
                }
                parts.push((vec![lo, hi], vec![mass / (hi - lo)]));
            }
            Component::Gaussian { mean, sd, mass } => {
                if !(sd > 0.0 && mean.is_finite() && sd.is_finite() && mass >= 0.0 && mass.is_finite()) {
                    return Err(PeakonError::Domain("gaussian needs sd > 0 and nonnegative mass".into()));
                }
                let cells = (2.0 * GAUSSIAN_WIDTH * GAUSSIAN_RESOLUTION) as usize;
                let lo = mean - GAUSSIAN_WIDTH * sd;
                let hw = 2.0 * GAUSSIAN_WIDTH * sd / cells as f64;
                let breaks: Vec<f64> = (0..=cells).map(|k| lo + k as f64 * hw).collect();
                // cell masses from the error function keep the total exact
                let cdf = |x: f64| 0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2));
                let total = cdf(breaks[cells]) - cdf(breaks[0]);
                let values = breaks
                    .windows(2)
                    .map(|w| mass * (cdf(w[1]) - cdf(w[0])) / total / (w[1] - w[0]))
                    .collect();
                parts.push((breaks, values));
            }
        }
    }
    let mut breaks: Vec<f64> = parts.iter().flat_map(|(b, _)| b.iter().copied()).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let values = breaks
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            parts
                .iter()
                .map(|(b, v)| {
                    if mid < b[0] || mid > *b.last().unwrap() {
                        0.0
                    } else {
                        let k = b.partition_point(|&x| x <= mid).saturating_sub(1).min(v.len() - 1);
                        v[k]
                    }
                })
                .sum()
        })
        .collect();
    Ok(Histogram { breaks, values })
}

/// Complementary error function: Taylor series below 2, continued fraction above.
fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        // erf series
        let mut sum = x;
        let mut term = x;
        let x2 = x * x;
        for k in 1..200 {
            let k = k as f64;
            term *= -x2 / k;
            let add = term / (2.0 * k + 1.0);
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        return 1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum;
    }
    // Lentz continued fraction for erfc
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..300 {
        let a = n as f64 * 0.5;
        d = x + a * d;
        d = if d.abs() < tiny { tiny } else { d };
        c = x + a / c;
        c = if c.abs() < tiny { tiny } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (f * std::f64::consts::PI.sqrt())
}

/// Mass and first moment of a histogram on [a, b].
fn cell_moments(h: &Histogram, a: f64, b: f64) -> (f64, f64) {
    let mut mass = CompensatedSum::new();
    let mut moment = CompensatedSum::new();
    for (w, &rho) in h.breaks.windows(2).zip(&h.values) {
        let (lo, hi) = (w[0].max(a), w[1].min(b));
        if hi > lo && rho > 0.0 {
            mass.add(rho * (hi - lo));
            moment.add(rho * 0.5 * (hi - lo) * (hi + lo));
        }
    }
    (mass.value(), moment.value())
}

/// Smallest x with ∫_{-∞}^x m₀ = target.
fn quantile(h: &Histogram, target: f64) -> f64 {
    let mut acc = 0.0;
    for (w, &rho) in h.breaks.windows(2).zip(&h.values) {
        let m = rho * (w[1] - w[0]);
        if rho > 0.0 && acc + m >= target {
            return (w[0] + (target - acc) / rho).min(w[1]);
        }
        acc += m;
    }
    *h.breaks.last().unwrap()
}

/// N cells of equal mass; p_i is half the cell mass and q_i its centroid.
pub fn approximate_from_density(m0: &Density, n: usize) -> Result<PeakonState> {
    if n == 0 {
        return Err(PeakonError::Domain("need at least one peakon".into()));
    }
    let hist = m0.histogram()?;
    let total = hist.mass();
    if !(total > 0.0) {
        return Err(PeakonError::Domain("density has zero total mass".into()));
    }
    let mut edges = Vec::with_capacity(n + 1);
    edges.push(hist.breaks[0]);
    edges.extend((1..n).map(|k| quantile(&hist, total * k as f64 / n as f64)));
    edges.push(*hist.breaks.last().unwrap());
    let mut p = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for w in edges.windows(2) {
        let (m, mx) = cell_moments(&hist, w[0], w[1]);
        if !(m > 0.0) {
            return Err(PeakonError::Domain("density too concentrated to split into the requested cells".into()));
        }
        p.push(0.5 * m);
        q.push(mx / m);
    }
    if q.windows(2).any(|w| w[1] - w[0] < GAP_TOL) {
        return Err(PeakonError::Domain("cell centroids closer than the gap guard".into()));
    }
    PeakonState::new(0.0, p, q)
}

/// ‖½ e^{-|·|} * m₀ - Σ p_i e^{-|· - q_i|}‖_{H¹}.
pub fn density_distance(m0: &Density, s: &PeakonState) -> Result<f64> {
    let m = m0.histogram()?.to_pwexp();
    let w0 = m.helmholtz_inverse()?;
    let target_energy = w0.mul(&m).integral();
    let cross: f64 = s
        .p
        .iter()
        .zip(&s.q)
        .map(|(p, q)| p * w0.value(*q))
        .collect::<CompensatedSum>()
        .value();
    let u = s.field();
    let d2 = target_energy - 4.0 * cross + h1_inner(&u, &u);
    Ok(d2.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn narrow_box_is_a_peakon() {
        let c = 1.5;
        let d = Density::Mixture {
            components: vec![Component::Box {
                lo: -1e-4,
                hi: 1e-4,
                mass: 2.0 * c,
            }],
        };
        let s = approximate_from_density(&d, 1).unwrap();
        assert_relative_eq!(s.p[0], c, max_relative = 1e-14);
        assert!(s.q[0].abs() < 1e-12);
    }

    #[test]
    fn two_boxes_two_peakons() {
        let d = Density::Mixture {
            components: vec![
                Component::Box { lo: -3.0, hi: -1.0, mass: 1.0 },
                Component::Box { lo: 2.0, hi: 6.0, mass: 1.0 },
            ],
        };
        let s = approximate_from_density(&d, 2).unwrap();
        assert_relative_eq!(s.q[0], -2.0, epsilon = 1e-12);
        assert_relative_eq!(s.q[1], 4.0, epsilon = 1e-12);
        assert_relative_eq!(s.p[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn zero_mass_rejected() {
        let d = Density::Grid {
            x: vec![0.0, 1.0],
            m: vec![0.0, 0.0],
        };
        assert!(approximate_from_density(&d, 2).is_err());
    }

    #[test]
    fn erfc_values() {
        assert_relative_eq!(erfc(0.0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(erfc(0.5), 0.4795001221869535, max_relative = 1e-14);
        assert_relative_eq!(erfc(3.0), 2.209049699858544e-5, max_relative = 1e-13);
        assert_relative_eq!(erfc(-1.0), 1.8427007929497148, max_relative = 1e-14);
    }

    #[test]
    fn gaussian_mass_is_exact() {
        let d = Density::Mixture {
            components: vec![Component::Gaussian { mean: 1.0, sd: 0.5, mass: 3.0 }],
        };
        assert_relative_eq!(d.histogram().unwrap().mass(), 3.0, max_relative = 1e-13);
        let s = approximate_from_density(&d, 1).unwrap();
        assert_relative_eq!(s.q[0], 1.0, epsilon = 1e-9);
    }

    /// Exact squared distance between a uniform box [0, W] of mass M and
    /// point masses m at q_i: ½(A - 2B + C).
    fn box_oracle(w: f64, mass: f64, s: &PeakonState) -> f64 {
        let rho = mass / w;
        let a = rho * rho * 2.0 * (w - 1.0 + (-w).exp());
        let b: f64 = s
            .p
            .iter()
            .zip(&s.q)
            .map(|(p, q)| 2.0 * p * rho * (2.0 - (-q).exp() - (-(w - q)).exp()))
            .sum();
        let mut c = 0.0;
        for (pi, qi) in s.p.iter().zip(&s.q) {
            for (pj, qj) in s.p.iter().zip(&s.q) {
                c += 4.0 * pi * pj * (-(qi - qj).abs()).exp();
            }
        }
        (0.5 * (a - 2.0 * b + c)).sqrt()
    }

    #[test]
    fn box_distance_matches_closed_form() {
        let d = Density::Mixture {
            components: vec![Component::Box { lo: 0.0, hi: 1.0, mass: 2.0 }],
        };
        for n in [1, 2, 4, 8, 16] {
            let s = approximate_from_density(&d, n).unwrap();
            let exact = box_oracle(1.0, 2.0, &s);
            let lib = density_distance(&d, &s).unwrap();
            assert_relative_eq!(lib, exact, max_relative = 1e-7);
        }
    }

    #[test]
    fn box_distance_first_order() {
        let d = Density::Mixture {
            components: vec![Component::Box { lo: 0.0, hi: 1.0, mass: 2.0 }],
        };
        let d8 = density_distance(&d, &approximate_from_density(&d, 8).unwrap()).unwrap();
        let d16 = density_distance(&d, &approximate_from_density(&d, 16).unwrap()).unwrap();
        let ratio = d8 / d16;
        assert!((1.99..=2.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn grid_density_roundtrip_json() {
        let d = Density::Grid {
            x: vec![0.0, 1.0, 2.0],
            m: vec![0.0, 2.0, 0.0],
        };
        let text = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<Density>(&text).unwrap(), d);
        assert_relative_eq!(d.histogram().unwrap().mass(), 2.0);
    }
}
