//! Peak tracking, modulation and the shift-minimized distance to a train.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PeakonError, Result};
use crate::field::{h1_dist, h1_inner, PeakedField};
use crate::sum::CompensatedSum;

pub const MODULATION_TOL: f64 = 1e-10;
pub const MODULATION_MAX_ITER: usize = 50;
pub const SIMPLEX_SCALE: f64 = 0.1;
pub const SIMPLEX_DIAMETER: f64 = 1e-8;

/// Argmax of u on each J_i = [y_i, y_{i+1}] (y_1 = -inf, y_{N+1} = +inf),
/// given the interior cuts y_2 < … < y_N. Ties go to the leftmost candidate.
pub fn locate_peaks(u: &PeakedField, cuts: &[f64]) -> Result<Vec<f64>> {
    if !u.all_positive() {
        return Err(PeakonError::Domain("locate_peaks needs a positive field".into()));
    }
    if cuts.windows(2).any(|w| !(w[0] < w[1])) || cuts.iter().any(|y| !y.is_finite()) {
        return Err(PeakonError::Domain("cut points must be finite and increasing".into()));
    }
    let n = cuts.len() + 1;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = if i == 0 { f64::NEG_INFINITY } else { cuts[i - 1] };
        let hi = if i + 1 == n { f64::INFINITY } else { cuts[i] };
        let mut cands: Vec<f64> = Vec::new();
        if lo.is_finite() {
            cands.push(lo);
        }
        cands.extend(u.nodes().iter().copied().filter(|&r| r >= lo && r <= hi));
        if hi.is_finite() {
            cands.push(hi);
        }
        let mut best: Option<(f64, f64)> = None;
        for x in cands {
            let v = u.value(x);
            if best.map_or(true, |(_, bv)| v > bv) {
                best = Some((x, v));
            }
        }
        let (x, _) = best.ok_or_else(|| PeakonError::Domain("empty interval without nodes".into()))?;
        out.push(x);
    }
    Ok(out)
}

/// Midpoints between consecutive centers.
pub fn midpoints(centers: &[f64]) -> Vec<f64> {
    centers.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

fn h(s: f64) -> f64 {
    s * (-s.abs()).exp()
}

fn dh(s: f64) -> f64 {
    (1.0 - s.abs()) * (-s.abs()).exp()
}

/// Y_i = ∫ (u - R_X) ∂_x φ_{c_i}(· - x_i) dx.
pub fn modulation_residual(u: &PeakedField, speeds: &[f64], x: &[f64]) -> Vec<f64> {
    (0..speeds.len())
        .map(|i| {
            let mut acc = CompensatedSum::new();
            for (a, r) in u.iter() {
                acc.add(a * h(x[i] - r));
            }
            for (j, c) in speeds.iter().enumerate() {
                acc.add(-c * h(x[i] - x[j]));
            }
            speeds[i] * acc.value()
        })
        .collect()
}

fn modulation_jacobian(u: &PeakedField, speeds: &[f64], x: &[f64]) -> DMatrix<f64> {
    let n = speeds.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let mut acc = CompensatedSum::new();
            for (a, r) in u.iter() {
                acc.add(a * dh(x[i] - r));
            }
            for (k, c) in speeds.iter().enumerate() {
                if k != i {
                    acc.add(-c * dh(x[i] - x[k]));
                }
            }
            speeds[i] * acc.value()
        } else {
            speeds[i] * speeds[j] * dh(x[i] - x[j])
        }
    })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Centers x̃ making u - R_x̃ orthogonal to every ∂_x φ_{c_i}(· - x̃_i), by
/// damped Newton from `guess`.
pub fn modulate(u: &PeakedField, speeds: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
    if speeds.len() != guess.len() {
        return Err(PeakonError::Domain("speeds and guess differ in length".into()));
    }
    let mut x = guess.to_vec();
    let mut y = modulation_residual(u, speeds, &x);
    let mut res = max_abs(&y);
    for iteration in 0..MODULATION_MAX_ITER {
        if res <= MODULATION_TOL {
            return Ok(x);
        }
        let jac = modulation_jacobian(u, speeds, &x);
        let rhs = -DVector::from_column_slice(&y);
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or(PeakonError::ModulationFailure {
                iterations: iteration,
                residual: res,
            })?;
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
            let ty = modulation_residual(u, speeds, &trial);
            let tr = max_abs(&ty);
            if tr < res || alpha < 1e-6 {
                x = trial;
                y = ty;
                res = tr;
                break;
            }
            alpha *= 0.5;
        }
    }
    if res <= MODULATION_TOL {
        return Ok(x);
    }
    Err(PeakonError::ModulationFailure {
        iterations: MODULATION_MAX_ITER,
        residual: res,
    })
}

/// Deterministic Nelder-Mead: initial simplex `x0 + scale e_i`, stops when
/// every vertex is within `diameter` of the best one.
pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    scale: f64,
    diameter: f64,
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    if n == 0 {
        return (vec![], f(x0));
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += scale;
        let fv = f(&v);
        simplex.push((v, fv));
    }
    let mut evals = n + 1;
    let point = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(w).map(|(a, b)| a + t * (b - a)).collect()
    };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].0.clone();
        let spread = simplex
            .iter()
            .map(|(v, _)| v.iter().zip(&best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread < diameter || evals >= max_evals {
            let (x, fx) = simplex.swap_remove(0);
            return (x, fx);
        }
        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let refl = point(&centroid, &worst.0, -1.0);
        let fr = f(&refl);
        evals += 1;
        if fr < simplex[0].1 {
            let exp = point(&centroid, &worst.0, -2.0);
            let fe = f(&exp);
            evals += 1;
            simplex[n] = if fe < fr { (exp, fe) } else { (refl, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (refl, fr);
            continue;
        }
        let (cand, fc) = if fr < worst.1 {
            let c = point(&centroid, &refl, 0.5);
            let fc = f(&c);
            (c, fc)
        } else {
            let c = point(&centroid, &worst.0, 0.5);
            let fc = f(&c);
            (c, fc)
        };
        evals += 1;
        if fc < worst.1.min(fr) {
            simplex[n] = (cand, fc);
            continue;
        }
        for k in 1..=n {
            let v = point(&best, &simplex[k].0, 0.5);
            let fv = f(&v);
            simplex[k] = (v, fv);
        }
        evals += n;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftFit {
    pub distance: f64,
    pub centers: Vec<f64>,
    pub ordered: bool,
}

/// D(X)² = E(u) + 2 Σ c_i c_j e^{-|x_i - x_j|} - 4 Σ c_j u(x_j).
pub fn shift_objective(u: &PeakedField, energy_u: f64, speeds: &[f64], x: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.add(energy_u);
    for (i, ci) in speeds.iter().enumerate() {
        for (j, cj) in speeds.iter().enumerate() {
            acc.add(2.0 * ci * cj * (-(x[i] - x[j]).abs()).exp());
        }
        acc.add(-4.0 * ci * u.value(x[i]));
    }
    acc.value()
}

/// inf over X of ‖u - Σ φ_{c_j}(· - x_j)‖_{H¹} by Nelder-Mead from `init`.
///
/// The objective has kinks where some x_j meets a node of u, and minimizers
/// often sit on one. After the simplex stage each coordinate is tried at the
/// nearby nodes, and the distance is reported from the explicit difference
/// field rather than the cancelling Gram expansion.
pub fn min_shift_distance(u: &PeakedField, speeds: &[f64], init: &[f64]) -> Result<ShiftFit> {
    if speeds.len() != init.len() {
        return Err(PeakonError::Domain("speeds and init differ in length".into()));
    }
    if init.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(PeakonError::Domain("initial centers must be increasing".into()));
    }
    let e = h1_inner(u, u);
    let obj = |x: &[f64]| shift_objective(u, e, speeds, x);
    let (mut x, mut fx) = nelder_mead(obj, init, SIMPLEX_SCALE, SIMPLEX_DIAMETER, 20_000 * init.len().max(1));

    let nodes = u.nodes();
    let mut improved = true;
    let mut rounds = 0;
    while improved && rounds < 10 {
        improved = false;
        rounds += 1;
        for j in 0..x.len() {
            let lo = nodes.partition_point(|&r| r < x[j] - 10.0 * SIMPLEX_DIAMETER.sqrt());
            let hi = nodes.partition_point(|&r| r <= x[j] + 10.0 * SIMPLEX_DIAMETER.sqrt());
            for &r in &nodes[lo..hi] {
                let old = x[j];
                x[j] = r;
                let fr = obj(&x);
                if fr < fx {
                    fx = fr;
                    improved = true;
                } else {
                    x[j] = old;
                }
            }
        }
    }
    let train = PeakedField::train(speeds, &x)?;
    Ok(ShiftFit {
        distance: h1_dist(u, &train),
        ordered: x.windows(2).all(|w| w[0] < w[1]),
        centers: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid_argmax(u: &PeakedField, lo: f64, hi: f64) -> f64 {
        let n = ((hi - lo) / 1e-4).round() as usize;
        let mut best = (lo, u.value(lo));
        for k in 0..=n {
            let x = lo + (hi - lo) * k as f64 / n as f64;
            let v = u.value(x);
            if v > best.1 {
                best = (x, v);
            }
        }
        best.0
    }

    #[test]
    fn pure_train_peaks_at_nodes() {
        let u = PeakedField::train(&[1.0, 2.0, 3.0], &[0.0, 20.0, 40.0]).unwrap();
        assert_eq!(locate_peaks(&u, &[10.0, 30.0]).unwrap(), vec![0.0, 20.0, 40.0]);
        let one = PeakedField::peakon(1.5, -3.0).unwrap();
        assert_eq!(locate_peaks(&one, &[]).unwrap(), vec![-3.0]);
    }

    #[test]
    fn perturbed_train_matches_grid() {
        let u = PeakedField::new(vec![1.0, 0.2, 0.1, 2.0], vec![0.0, 0.7, 6.0, 9.0]).unwrap();
        let x = locate_peaks(&u, &[5.0]).unwrap();
        assert!((x[0] - grid_argmax(&u, -5.0, 5.0)).abs() <= 1e-4);
        assert!((x[1] - grid_argmax(&u, 5.0, 15.0)).abs() <= 1e-4);
    }

    #[test]
    fn modulation_fixed_point() {
        let z = [0.0, 30.0];
        let c = [1.0, 2.0];
        let u = PeakedField::train(&c, &z).unwrap();
        assert_eq!(modulation_residual(&u, &c, &z), vec![0.0, 0.0]);
        assert_eq!(modulate(&u, &c, &z).unwrap(), z.to_vec());
    }

    #[test]
    fn symmetric_perturbation_keeps_center() {
        // two micro-peakons placed symmetrically about z_1
        let c = [1.0, 2.0];
        let z = [0.0, 30.0];
        let mut amps = c.to_vec();
        let mut nodes = z.to_vec();
        amps.extend([0.01, 0.01]);
        nodes.extend([-0.4, 0.4]);
        let u = PeakedField::new(amps, nodes).unwrap();
        let x = modulate(&u, &c, &[0.05, 30.02]).unwrap();
        assert!(x[0].abs() < 1e-9, "{x:?}");
        assert!(max_abs(&modulation_residual(&u, &c, &x)) <= MODULATION_TOL);
    }

    #[test]
    fn modulation_failure_reported() {
        // h'(1) = 0: Newton cannot move from a guess one unit off the crest
        let u = PeakedField::new(vec![1.0], vec![0.0]).unwrap();
        let r = modulate(&u, &[1.0], &[1.0]);
        assert!(matches!(r, Err(PeakonError::ModulationFailure { iterations: 0, .. })));
    }

    #[test]
    fn nelder_mead_quadratic() {
        let (x, fx) = nelder_mead(|v| (v[0] - 1.0).powi(2) + 3.0 * (v[1] + 2.0).powi(2), &[0.0, 0.0], 0.1, 1e-10, 100_000);
        assert!(fx < 1e-16);
        assert!((x[0] - 1.0).abs() < 1e-8 && (x[1] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn exact_train_distance_zero() {
        let c = [1.0, 2.0];
        let z = [0.0, 25.0];
        let u = PeakedField::train(&c, &z).unwrap();
        let fit = min_shift_distance(&u, &c, &z).unwrap();
        assert_eq!(fit.distance, 0.0);
        assert_eq!(fit.centers, z.to_vec());
        assert!(fit.ordered);
    }

    #[test]
    fn shifted_bump_recovered() {
        let c = [1.0, 2.0];
        let u = PeakedField::train(&c, &[0.0, 25.05]).unwrap();
        let fit = min_shift_distance(&u, &c, &[0.0, 25.0]).unwrap();
        assert_eq!(fit.centers, vec![0.0, 25.05]);
        assert_eq!(fit.distance, 0.0);
    }

    #[test]
    fn objective_matches_explicit_distance() {
        let u = PeakedField::new(vec![1.02, 0.03, 1.97], vec![0.01, 12.0, 25.0]).unwrap();
        let c = [1.0, 2.0];
        let x = [0.2, 24.9];
        let d = h1_dist(&u, &PeakedField::train(&c, &x).unwrap());
        let e = h1_inner(&u, &u);
        assert_relative_eq!(shift_objective(&u, e, &c, &x), d * d, max_relative = 1e-10);
        let fit = min_shift_distance(&u, &c, &x).unwrap();
        assert!(fit.distance <= d);
        assert_relative_eq!(
            shift_objective(&u, e, &c, &fit.centers).max(0.0).sqrt(),
            fit.distance,
            max_relative = 1e-6
        );
    }
}
