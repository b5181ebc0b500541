//! Piecewise exponential-polynomial functions.
//!
//! On each interval a function is a finite sum of terms
//! `c (x - o)^k exp(rate (x - o))`. Each term keeps its own origin `o`, placed
//! at the end of the interval where the term is largest (right end for
//! positive rates, left end otherwise). Coefficients therefore carry the
//! actual size of the term and products never overflow, even across the wide
//! gaps of well-separated peakon trains.

use crate::error::{PeakonError, Result};
use crate::field::PeakedField;
use crate::sum::CompensatedSum;

/// Relative distance to a degenerate convolution exponent below which the
/// polynomial-times-exponential antiderivative is used.
pub const DEGENERATE_RATE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub coef: f64,
    pub rate: f64,
    pub power: u8,
    pub origin: f64,
}

impl ExpTerm {
    pub fn new(coef: f64, rate: f64, origin: f64) -> Self {
        Self {
            coef,
            rate,
            power: 0,
            origin,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let t = x - self.origin;
        let poly = if self.power == 0 { 1.0 } else { t.powi(self.power as i32) };
        self.coef * poly * (self.rate * t).exp()
    }

    /// Same function written around `origin`; a power-k term expands into
    /// k + 1 terms.
    fn reorigin(&self, origin: f64, out: &mut Vec<ExpTerm>) {
        let delta = origin - self.origin;
        let base = self.coef * (self.rate * delta).exp();
        if self.power == 0 {
            out.push(ExpTerm::new(base, self.rate, origin));
            return;
        }
        // (x - o)^k = sum_m C(k, m) delta^(k-m) (x - o')^m
        let k = self.power as i32;
        let mut binom = 1.0;
        for m in 0..=k {
            if m > 0 {
                binom = binom * (k - m + 1) as f64 / m as f64;
            }
            out.push(ExpTerm {
                coef: base * binom * delta.powi(k - m),
                rate: self.rate,
                power: m as u8,
                origin,
            });
        }
    }

    /// `int_a^b` of the term.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if self.coef == 0.0 {
            return 0.0;
        }
        let lo = a - self.origin;
        let hi = b - self.origin;
        self.coef * tpow_exp_integral(self.power, self.rate, lo, hi)
    }
}

/// Origin for a term with this rate on `[lo, hi]`.
pub fn canonical_origin(lo: f64, hi: f64, rate: f64) -> f64 {
    if rate > 0.0 {
        if hi.is_finite() {
            hi
        } else {
            lo
        }
    } else if lo.is_finite() {
        lo
    } else {
        hi
    }
}

/// `int_0^w s^k exp(mu s) ds` for `w >= 0` (possibly infinite).
fn tpow_exp_from_zero(k: u8, mu: f64, w: f64) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    if w.is_infinite() {
        if mu < 0.0 {
            let mut fact = 1.0;
            for j in 1..=k {
                fact *= j as f64;
            }
            return fact / (-mu).powi(k as i32 + 1);
        }
        return f64::INFINITY;
    }
    let z = mu * w;
    if k == 0 {
        return if mu == 0.0 { w } else { w * (z.exp_m1() / z) };
    }
    if z.abs() <= 2.0 {
        // sum_n mu^n w^(n+k+1) / (n! (n+k+1))
        let mut term = w.powi(k as i32 + 1);
        let mut acc = CompensatedSum::new();
        for n in 0..80 {
            if n > 0 {
                term *= z / n as f64;
            }
            let contrib = term / (n + k as usize + 1) as f64;
            acc.add(contrib);
            if contrib.abs() <= 1e-18 * acc.value().abs() {
                break;
            }
        }
        return acc.value();
    }
    // I_j = (w^j e^z - j I_{j-1}) / mu
    let ez = z.exp();
    let mut prev = z.exp_m1() / mu;
    for j in 1..=k {
        prev = (w.powi(j as i32) * ez - j as f64 * prev) / mu;
    }
    prev
}

/// `int_lo^hi t^k exp(rate t) dt` with `lo <= hi`, either possibly infinite.
fn tpow_exp_integral(k: u8, rate: f64, lo: f64, hi: f64) -> f64 {
    let sgn = if k % 2 == 0 { 1.0 } else { -1.0 };
    // int_{-w}^0 t^k e^{rate t} dt = (-1)^k int_0^w s^k e^{-rate s} ds
    let left = |w: f64| sgn * tpow_exp_from_zero(k, -rate, w);
    let right = |w: f64| tpow_exp_from_zero(k, rate, w);
    if lo >= 0.0 {
        right(hi) - right(lo)
    } else if hi <= 0.0 {
        left(-lo) - left(-hi)
    } else {
        left(-lo) + right(hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub terms: Vec<ExpTerm>,
}

impl Piece {
    pub fn value(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.value(x))
            .collect::<CompensatedSum>()
            .value()
    }

    /// Terms re-expressed with origins canonical for the sub-interval `[a, b]`.
    pub fn restricted(&self, a: f64, b: f64) -> Vec<ExpTerm> {
        let mut out = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            t.reorigin(canonical_origin(a, b, t.rate), &mut out);
        }
        simplify(out)
    }

    pub fn integral(&self) -> f64 {
        integrate_terms(&self.terms, self.lo, self.hi)
    }
}

pub fn integrate_terms(terms: &[ExpTerm], a: f64, b: f64) -> f64 {
    terms
        .iter()
        .map(|t| t.integral(a, b))
        .collect::<CompensatedSum>()
        .value()
}

pub fn eval_terms(terms: &[ExpTerm], x: f64) -> f64 {
    terms
        .iter()
        .map(|t| t.value(x))
        .collect::<CompensatedSum>()
        .value()
}

/// Products of two term lists living on the same interval `[a, b]`.
pub fn multiply_terms(lhs: &[ExpTerm], rhs: &[ExpTerm], a: f64, b: f64) -> Vec<ExpTerm> {
    let mut out = Vec::with_capacity(lhs.len() * rhs.len());
    let mut left = Vec::new();
    let mut right = Vec::new();
    for p in lhs {
        for q in rhs {
            let rate = p.rate + q.rate;
            let origin = canonical_origin(a, b, rate);
            left.clear();
            right.clear();
            p.reorigin(origin, &mut left);
            q.reorigin(origin, &mut right);
            for l in &left {
                for r in &right {
                    out.push(ExpTerm {
                        coef: l.coef * r.coef,
                        rate,
                        power: l.power + r.power,
                        origin,
                    });
                }
            }
        }
    }
    simplify(out)
}

/// Merges terms with identical shape and drops exact zeros.
fn simplify(mut terms: Vec<ExpTerm>) -> Vec<ExpTerm> {
    terms.sort_by(|x, y| {
        x.rate
            .total_cmp(&y.rate)
            .then(x.power.cmp(&y.power))
            .then(x.origin.total_cmp(&y.origin))
    });
    let mut out: Vec<ExpTerm> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.last_mut() {
            Some(last) if last.rate == t.rate && last.power == t.power && last.origin == t.origin => {
                last.coef += t.coef;
            }
            _ => out.push(t),
        }
    }
    out.retain(|t| t.coef != 0.0);
    out
}

/// A function on the real line, piecewise a sum of [`ExpTerm`]s. Pieces are
/// contiguous; the first starts at `-inf` and the last ends at `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseExp {
    pieces: Vec<Piece>,
}

impl PiecewiseExp {
    pub fn zero() -> Self {
        Self {
            pieces: vec![Piece {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
                terms: Vec::new(),
            }],
        }
    }

    /// Builds from contiguous pieces covering the line.
    pub fn from_pieces(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Ok(Self::zero());
        }
        if pieces[0].lo != f64::NEG_INFINITY || pieces[pieces.len() - 1].hi != f64::INFINITY {
            return Err(PeakonError::Domain("pieces must cover the real line".into()));
        }
        for w in pieces.windows(2) {
            if w[0].hi != w[1].lo || w[0].lo >= w[0].hi {
                return Err(PeakonError::Domain("pieces must be contiguous and ordered".into()));
            }
        }
        Ok(Self { pieces })
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Finite breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.lo).collect()
    }

    fn field_pieces(field: &PeakedField, slope: bool) -> Self {
        let nodes = field.nodes();
        let amps = field.amps();
        let n = nodes.len();
        if n == 0 {
            return Self::zero();
        }
        let sign_b = if slope { -1.0 } else { 1.0 };
        let mut pieces = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let lo = if k == 0 { f64::NEG_INFINITY } else { nodes[k - 1] };
            let hi = if k == n { f64::INFINITY } else { nodes[k] };
            let mut terms = Vec::with_capacity(2);
            if k < n {
                let a = (k..n)
                    .map(|i| amps[i] * (hi - nodes[i]).exp())
                    .collect::<CompensatedSum>()
                    .value();
                terms.push(ExpTerm::new(a, 1.0, hi));
            }
            if k > 0 {
                let b = (0..k)
                    .map(|i| amps[i] * (nodes[i] - lo).exp())
                    .collect::<CompensatedSum>()
                    .value();
                terms.push(ExpTerm::new(sign_b * b, -1.0, lo));
            }
            terms.retain(|t| t.coef != 0.0);
            pieces.push(Piece { lo, hi, terms });
        }
        Self { pieces }
    }

    /// The field itself.
    pub fn from_field(field: &PeakedField) -> Self {
        Self::field_pieces(field, false)
    }

    /// Its derivative away from nodes.
    pub fn from_field_slope(field: &PeakedField) -> Self {
        Self::field_pieces(field, true)
    }

    pub fn piece_index(&self, x: f64) -> usize {
        // last piece with lo <= x
        self.pieces.partition_point(|p| p.lo <= x).saturating_sub(1)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.pieces[self.piece_index(x)].value(x)
    }

    fn combine(&self, other: &Self, op: impl Fn(&[ExpTerm], &[ExpTerm], f64, f64) -> Vec<ExpTerm>) -> Self {
        let mut cuts: Vec<f64> = self.breakpoints();
        cuts.extend(other.breakpoints());
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut bounds = Vec::with_capacity(cuts.len() + 2);
        bounds.push(f64::NEG_INFINITY);
        bounds.extend(cuts);
        bounds.push(f64::INFINITY);

        let pieces = bounds
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let probe = interior_point(a, b);
                let lhs = self.pieces[self.piece_index(probe)].restricted(a, b);
                let rhs = other.pieces[other.piece_index(probe)].restricted(a, b);
                Piece {
                    lo: a,
                    hi: b,
                    terms: op(&lhs, &rhs, a, b),
                }
            })
            .collect();
        Self { pieces }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.combine(other, multiply_terms)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |l, r, _, _| {
            let mut v = l.to_vec();
            v.extend_from_slice(r);
            simplify(v)
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                lo: p.lo,
                hi: p.hi,
                terms: p
                    .terms
                    .iter()
                    .map(|t| ExpTerm {
                        coef: t.coef * factor,
                        ..*t
                    })
                    .collect(),
            })
            .collect();
        Self { pieces }
    }

    /// `int_R f dx`. Non-integrable tails give an infinite or NaN result.
    pub fn integral(&self) -> f64 {
        self.pieces
            .iter()
            .map(Piece::integral)
            .collect::<CompensatedSum>()
            .value()
    }

    /// True when every term on the unbounded end pieces decays.
    pub fn decays(&self) -> bool {
        let first = &self.pieces[0];
        let last = &self.pieces[self.pieces.len() - 1];
        let left_ok = first.terms.iter().all(|t| t.coef == 0.0 || t.rate > 0.0);
        let right_ok = last.terms.iter().all(|t| t.coef == 0.0 || t.rate < 0.0);
        left_ok && right_ok
    }

    /// `(1 - d_xx)^{-1} f = 1/2 exp(-|.|) * f` for a decaying, purely
    /// exponential `f` (no polynomial factors). The result is again
    /// piecewise exponential on the same breakpoints; rates equal to -1 or +1
    /// produce `x exp(-+x)` terms.
    pub fn helmholtz_inverse(&self) -> Result<Self> {
        if !self.decays() {
            return Err(PeakonError::Domain(
                "Helmholtz inverse needs an integrand that decays at both ends".into(),
            ));
        }
        if self.pieces.iter().any(|p| p.terms.iter().any(|t| t.power != 0)) {
            return Err(PeakonError::Domain(
                "Helmholtz inverse is implemented for purely exponential pieces".into(),
            ));
        }
        let m = self.pieces.len();
        let kernel_up = |origin: f64| ExpTerm::new(1.0, 1.0, origin);
        let kernel_down = |origin: f64| ExpTerm::new(1.0, -1.0, origin);

        // left[j] = int_{-inf}^{lo_j} e^{y - lo_j} f(y) dy
        let mut left = vec![0.0; m];
        for j in 1..m {
            let prev = &self.pieces[j - 1];
            let (a, b) = (prev.lo, prev.hi);
            let decay = if a.is_finite() { (-(b - a)).exp() } else { 0.0 };
            let weighted = multiply_terms(&prev.restricted(a, b), &[kernel_up(b)], a, b);
            left[j] = decay * left[j - 1] + integrate_terms(&weighted, a, b);
        }
        // right[j] = int_{hi_j}^{inf} e^{-(y - hi_j)} f(y) dy
        let mut right = vec![0.0; m];
        for j in (0..m - 1).rev() {
            let next = &self.pieces[j + 1];
            let (a, b) = (next.lo, next.hi);
            let decay = if b.is_finite() { (-(b - a)).exp() } else { 0.0 };
            let weighted = multiply_terms(&next.restricted(a, b), &[kernel_down(a)], a, b);
            right[j] = decay * right[j + 1] + integrate_terms(&weighted, a, b);
        }

        let mut pieces = Vec::with_capacity(m);
        for (j, p) in self.pieces.iter().enumerate() {
            let (a, b) = (p.lo, p.hi);
            let mut terms = Vec::new();
            if a.is_finite() && left[j] != 0.0 {
                terms.push(ExpTerm::new(0.5 * left[j], -1.0, a));
            }
            if b.is_finite() && right[j] != 0.0 {
                terms.push(ExpTerm::new(0.5 * right[j], 1.0, b));
            }
            for t in &p.terms {
                let (c, lam, o) = (t.coef, t.rate, t.origin);
                // 1/2 int_a^x e^{-(x-y)} c e^{lam (y - o)} dy
                if (lam + 1.0).abs() < DEGENERATE_RATE_TOL {
                    if a.is_finite() {
                        terms.push(ExpTerm {
                            coef: 0.5 * c * (lam * (a - o)).exp(),
                            rate: -1.0,
                            power: 1,
                            origin: a,
                        });
                    }
                } else {
                    terms.push(ExpTerm::new(0.5 * c / (1.0 + lam), lam, o));
                    if a.is_finite() {
                        terms.push(ExpTerm::new(-0.5 * c / (1.0 + lam) * (lam * (a - o)).exp(), -1.0, a));
                    }
                }
                // 1/2 int_x^b e^{-(y-x)} c e^{lam (y - o)} dy
                if (lam - 1.0).abs() < DEGENERATE_RATE_TOL {
                    if b.is_finite() {
                        terms.push(ExpTerm {
                            coef: -0.5 * c * (lam * (b - o)).exp(),
                            rate: 1.0,
                            power: 1,
                            origin: b,
                        });
                    }
                } else {
                    terms.push(ExpTerm::new(-0.5 * c / (lam - 1.0), lam, o));
                    if b.is_finite() {
                        terms.push(ExpTerm::new(0.5 * c / (lam - 1.0) * (lam * (b - o)).exp(), 1.0, b));
                    }
                }
            }
            let mut canon = Vec::with_capacity(terms.len());
            for t in &terms {
                t.reorigin(canonical_origin(a, b, t.rate), &mut canon);
            }
            pieces.push(Piece {
                lo: a,
                hi: b,
                terms: simplify(canon),
            });
        }
        Ok(Self { pieces })
    }
}

/// A finite point of `[a, b]` (either end may be infinite).
pub fn interior_point(a: f64, b: f64) -> f64 {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => 0.5 * (a + b),
        (true, false) => a + 1.0,
        (false, true) => b - 1.0,
        (false, false) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn power_integrals_match_quadrature() {
        for &(k, rate, lo, hi) in &[
            (0u8, -1.3, 0.0, 4.0),
            (1, 0.7, -2.0, 1.5),
            (2, -0.01, 0.5, 3.0),
            (1, -3.0, -1.0, 0.0),
            (2, 2.5, -0.2, 0.9),
            (1, 0.0, -1.0, 2.0),
        ] {
            let exact = tpow_exp_integral(k, rate, lo, hi);
            let oracle = simpson(|t: f64| t.powi(k as i32) * (rate * t).exp(), lo, hi, 20_000);
            assert_relative_eq!(exact, oracle, max_relative = 1e-11, epsilon = 1e-14);
        }
        assert_relative_eq!(tpow_exp_integral(2, -2.0, 0.0, f64::INFINITY), 0.25, max_relative = 1e-15);
        assert_relative_eq!(tpow_exp_integral(1, 3.0, f64::NEG_INFINITY, 0.0), -1.0 / 9.0, max_relative = 1e-15);
    }

    #[test]
    fn reorigin_preserves_values() {
        let t = ExpTerm {
            coef: 0.7,
            rate: -0.4,
            power: 2,
            origin: 1.0,
        };
        let mut out = Vec::new();
        t.reorigin(2.5, &mut out);
        for &x in &[-1.0, 0.3, 2.0, 4.0] {
            assert_relative_eq!(eval_terms(&out, x), t.value(x), max_relative = 1e-13);
        }
    }

    #[test]
    fn field_pieces_reproduce_field() {
        let u = PeakedField::new(vec![0.4, -1.2, 2.0], vec![-3.0, 0.5, 40.0]).unwrap();
        let pw = PiecewiseExp::from_field(&u);
        let dx = PiecewiseExp::from_field_slope(&u);
        for &x in &[-10.0, -3.0, -1.0, 0.5, 7.0, 39.0, 45.0] {
            assert_relative_eq!(pw.value(x), u.value(x), max_relative = 1e-13, epsilon = 1e-300);
            if !u.nodes().contains(&x) {
                assert_relative_eq!(dx.value(x), u.slope(x), max_relative = 1e-13, epsilon = 1e-300);
            }
        }
    }

    #[test]
    fn products_survive_wide_gaps() {
        // at a gap of 400 the e^{3x} coefficients would underflow with a shared shift
        let u = PeakedField::new(vec![1.0, 2.0], vec![0.0, 400.0]).unwrap();
        let pw = PiecewiseExp::from_field(&u);
        let cube = pw.mul(&pw).mul(&pw);
        assert_relative_eq!(cube.value(399.0), u.value(399.0).powi(3), max_relative = 1e-13);
        assert_relative_eq!(cube.value(1.0), u.value(1.0).powi(3), max_relative = 1e-13);
        assert!(cube.integral().is_finite());
    }

    #[test]
    fn helmholtz_of_decaying_kernel() {
        // f = e^{-|y|}: (1/2) int e^{-|y|} e^{-|y|} dy = 1/2 at x = 0
        let f = PiecewiseExp::from_field(&PeakedField::peakon(1.0, 0.0).unwrap());
        let h = f.helmholtz_inverse().unwrap();
        assert_relative_eq!(h.value(0.0), 0.5, max_relative = 1e-14);
        // closed form (1 + |x|) e^{-|x|} / 2
        for &x in &[-3.0, -0.5, 1.0, 6.0] {
            assert_relative_eq!(h.value(x), 0.5 * (1.0 + x.abs()) * (-x.abs()).exp(), max_relative = 1e-13);
        }
    }

    #[test]
    fn helmholtz_rejects_growth() {
        let bad = PiecewiseExp::from_pieces(vec![Piece {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            terms: vec![ExpTerm::new(1.0, 0.0, 0.0)],
        }])
        .unwrap();
        assert!(bad.helmholtz_inverse().is_err());
        assert_eq!(PiecewiseExp::zero().helmholtz_inverse().unwrap().value(1.0), 0.0);
    }
}
