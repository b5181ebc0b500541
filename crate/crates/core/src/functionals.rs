//! Conserved functionals E, F, their weighted versions and the Helmholtz inverse.

use crate::error::{PeakonError, Result};
use crate::field::{h1_inner, PeakedField};
use crate::pwexp::{ExpTerm, Piece, PiecewiseExp};
use crate::weight::WeightProfile;

/// E(u) = ∫ u² + u_x².
pub fn energy(u: &PeakedField) -> f64 {
    h1_inner(u, u)
}

/// u² + u_x² as a piecewise exponential: 2A²e^{2x} + 2B²e^{-2x} per segment.
pub fn energy_density(u: &PeakedField) -> PiecewiseExp {
    let base = PiecewiseExp::from_field(u);
    let pieces = base
        .pieces()
        .iter()
        .map(|p| Piece {
            lo: p.lo,
            hi: p.hi,
            terms: p
                .terms
                .iter()
                .map(|t| ExpTerm::new(2.0 * t.coef * t.coef, 2.0 * t.rate, t.origin))
                .collect(),
        })
        .collect();
    PiecewiseExp::from_pieces(pieces).expect("field pieces cover the line")
}

/// u³ + u u_x².
pub fn f_density(u: &PeakedField) -> PiecewiseExp {
    PiecewiseExp::from_field(u).mul(&energy_density(u))
}

/// F(u) = ∫ u³ + u u_x².
pub fn moment_f(u: &PeakedField) -> f64 {
    f_density(u).integral()
}

/// ∫ (u² + u_x²) w.
pub fn weighted_energy(u: &PeakedField, w: &WeightProfile) -> f64 {
    w.integrate(&energy_density(u), 0)
}

/// ∫ (u³ + u u_x²) w.
pub fn weighted_f(u: &PeakedField, w: &WeightProfile) -> f64 {
    w.integrate(&f_density(u), 0)
}

/// (1 - ∂²)^{-1} f evaluated at x.
pub fn helmholtz_inverse(f: &PiecewiseExp, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(PeakonError::Domain(format!("evaluation point {x} is not finite")));
    }
    Ok(f.helmholtz_inverse()?.value(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weight::partition;
    use approx::assert_relative_eq;

    /// Simpson on each node-free sub-interval of [-w, w].
    fn oracle(u: &PeakedField, w: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
        let mut cuts = vec![-w];
        cuts.extend(u.nodes().iter().copied().filter(|r| r.abs() < w));
        cuts.push(w);
        let mut total = 0.0;
        for c in cuts.windows(2) {
            let (a, b) = (c[0], c[1]);
            let n = (((b - a) / 2e-3).ceil() as usize).max(2) * 2;
            let h = (b - a) / n as f64;
            let g = |x: f64| {
                // one-sided slope inside the open interval
                let xm = x.clamp(a + 1e-13, b - 1e-13);
                f(u.value(x), u.slope(xm))
            };
            let mut s = g(a) + g(b);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(a + i as f64 * h);
            }
            total += s * h / 3.0;
        }
        total
    }

    fn sample_field() -> PeakedField {
        PeakedField::new(vec![0.7, 1.6, 0.4], vec![-4.0, 0.3, 5.5]).unwrap()
    }

    #[test]
    fn peakon_values() {
        for &c in &[0.5, 1.0, 3.0] {
            let u = PeakedField::peakon(c, 1.7).unwrap();
            assert_relative_eq!(energy(&u), 2.0 * c * c, max_relative = 1e-12);
            assert_relative_eq!(moment_f(&u), 4.0 * c * c * c / 3.0, max_relative = 1e-12);
        }
        assert_eq!(energy(&PeakedField::zero()), 0.0);
        assert_eq!(moment_f(&PeakedField::zero()), 0.0);
    }

    #[test]
    fn two_peakon_train_energy() {
        let d = 3.0;
        let u = PeakedField::train(&[1.0, 2.0], &[0.0, d]).unwrap();
        assert_relative_eq!(energy(&u), 10.0 + 8.0 * (-d as f64).exp(), max_relative = 1e-14);
        let q = oracle(&u, 40.0, |v, s| v * v + s * s);
        assert_relative_eq!(energy(&u), q, max_relative = 1e-8);
    }

    #[test]
    fn f_matches_quadrature() {
        let u = sample_field();
        let q = oracle(&u, 40.0, |v, s| v * v * v + v * s * s);
        assert_relative_eq!(moment_f(&u), q, max_relative = 1e-8);
    }

    #[test]
    fn f_is_cubic() {
        let u = sample_field();
        assert_relative_eq!(moment_f(&u.scaled(2.0)), 8.0 * moment_f(&u), max_relative = 1e-13);
    }

    #[test]
    fn weighted_energy_far_left_and_right() {
        let u = sample_field();
        let e = energy(&u);
        let k = 5.0;
        let y: f64 = -30.0;
        let left = WeightProfile::psi(y, k).unwrap();
        assert!((weighted_energy(&u, &left) - e).abs() <= e * (-y.abs() / k).exp());
        let right = WeightProfile::psi(80.0, k).unwrap();
        let r = weighted_energy(&u, &right);
        assert!(r > 0.0 && r <= 2.0 * e * (-(80.0 - 5.5) / (2.0 * k)).exp());
    }

    #[test]
    fn weighted_matches_quadrature_across_blend() {
        let u = sample_field();
        let w = WeightProfile::psi(1.0, 4.0).unwrap();
        let mut cuts = vec![-50.0];
        cuts.extend(u.nodes().iter().copied());
        cuts.push(50.0);
        let mut total = 0.0;
        for c in cuts.windows(2) {
            let (a, b) = (c[0], c[1]);
            let n = 40_000;
            let h = (b - a) / n as f64;
            let g = |x: f64| {
                let xm = x.clamp(a + 1e-13, b - 1e-13);
                (u.value(x).powi(2) + u.slope(xm).powi(2)) * w.value(x)
            };
            let mut s = g(a) + g(b);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(a + i as f64 * h);
            }
            total += s * h / 3.0;
        }
        assert_relative_eq!(weighted_energy(&u, &w), total, max_relative = 1e-9);
    }

    #[test]
    fn partition_sums_to_totals() {
        let u = sample_field();
        let parts = partition(&[-2.0, 3.0], 4.0).unwrap();
        let e: f64 = parts.iter().map(|w| weighted_energy(&u, w)).sum();
        let f: f64 = parts.iter().map(|w| weighted_f(&u, w)).sum();
        assert_relative_eq!(e, energy(&u), max_relative = 1e-10);
        assert_relative_eq!(f, moment_f(&u), max_relative = 1e-10);
    }

    #[test]
    fn single_peakon_unit_weight_f() {
        let u = PeakedField::peakon(1.5, 2.0).unwrap();
        let w = partition(&[], 4.0).unwrap()[0];
        assert_relative_eq!(weighted_f(&u, &w), 4.0 * 1.5f64.powi(3) / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn helmholtz_against_convolution() {
        // f = u² + u_x² for a random field
        let u = sample_field();
        let f = energy_density(&u);
        for &x in &[-6.0, -4.0, -1.0, 0.3, 2.0, 5.5, 9.0] {
            let mut cuts = vec![-60.0];
            cuts.extend(u.nodes().iter().copied());
            cuts.push(x);
            cuts.push(60.0);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut total = 0.0;
            for c in cuts.windows(2) {
                let (a, b) = (c[0], c[1]);
                let n = 20_000;
                let h = (b - a) / n as f64;
                let g = |y: f64| {
                    let ym = y.clamp(a + 1e-13, b - 1e-13);
                    0.5 * (-(x - y).abs()).exp() * f.value(ym)
                };
                let mut s = g(a) + g(b);
                for i in 1..n {
                    s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(a + i as f64 * h);
                }
                total += s * h / 3.0;
            }
            assert_relative_eq!(helmholtz_inverse(&f, x).unwrap(), total, max_relative = 1e-9);
        }
        assert_eq!(helmholtz_inverse(&PiecewiseExp::zero(), 1.0).unwrap(), 0.0);
        assert!(helmholtz_inverse(&f, f64::NAN).is_err());
    }
}
