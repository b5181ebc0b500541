//! The isospectral matrix A = (p_j e^{-|q_i - q_j|/2}) and its symmetrized
//! eigenproblem B D B with B = Λ^{1/2}.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::PeakonState;
use crate::error::{PeakonError, Result};

pub const JACOBI_MAX_SWEEPS: usize = 100;
pub const JACOBI_TOL: f64 = 1e-14;
pub const CONDITIONING_FLOOR: f64 = 1e-13;
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PeakonMatrix(pub DMatrix<f64>);

/// Sorted ascending eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spectrum {
    pub lambda: Vec<f64>,
}

fn kernel(s: &PeakonState) -> DMatrix<f64> {
    let n = s.len();
    DMatrix::from_fn(n, n, |i, j| (-0.5 * (s.q[i] - s.q[j]).abs()).exp())
}

pub fn peakon_matrix(s: &PeakonState) -> PeakonMatrix {
    let lam = kernel(s);
    PeakonMatrix(DMatrix::from_fn(s.len(), s.len(), |i, j| s.p[j] * lam[(i, j)]))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues ascending; eigenvectors are the matching columns.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(PeakonError::Domain("matrix is not square".into()));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(PeakonError::Domain("matrix has non-finite entries".into()));
    }
    let norm = m.norm();
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * norm.max(1.0) {
                return Err(PeakonError::Domain("matrix is not symmetric".into()));
            }
        }
    }
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let off = |a: &DMatrix<f64>| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&a) >= JACOBI_TOL * norm && norm > 0.0 {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(PeakonError::Convergence(format!(
                "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps"
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// Eigenvalues of A together with eigenvectors v = B w.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenpairs {
    pub lambda: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

fn symmetrized(s: &PeakonState) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n = s.len();
    let (mu, u) = symmetric_eigen(&kernel(s))?;
    if n == 0 {
        return Ok((vec![], DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)));
    }
    let max = mu[n - 1];
    let min = mu[0];
    if !(min >= CONDITIONING_FLOOR * max) {
        return Err(PeakonError::Conditioning { ratio: min / max });
    }
    let root = DMatrix::from_diagonal(&DVector::from_iterator(n, mu.iter().map(|x| x.sqrt())));
    let b = &u * root * u.transpose();
    let b = (&b + b.transpose()) * 0.5;
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(&s.p));
    let bdb = &b * d * &b;
    let bdb = (&bdb + bdb.transpose()) * 0.5;
    let (lambda, w) = symmetric_eigen(&bdb)?;
    Ok((lambda, b, w))
}

pub fn spectrum(s: &PeakonState) -> Result<Spectrum> {
    Ok(Spectrum {
        lambda: symmetrized(s)?.0,
    })
}

pub fn eigenpairs(s: &PeakonState) -> Result<Eigenpairs> {
    let (lambda, b, w) = symmetrized(s)?;
    let v = b * w;
    let vectors = (0..lambda.len()).map(|j| v.column(j).iter().copied().collect()).collect();
    Ok(Eigenpairs { lambda, vectors })
}

/// max_i |(A v)_i - λ v_i|.
pub fn eigen_residual(s: &PeakonState, lambda: f64, v: &[f64]) -> Result<f64> {
    if v.len() != s.len() {
        return Err(PeakonError::Domain(format!(
            "vector has length {}, state has {} peakons",
            v.len(),
            s.len()
        )));
    }
    let a = peakon_matrix(s).0;
    let av = &a * DVector::from_column_slice(v);
    Ok(av
        .iter()
        .zip(v)
        .map(|(x, y)| (x - lambda * y).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn state(p: &[f64], q: &[f64]) -> PeakonState {
        PeakonState::new(0.0, p.to_vec(), q.to_vec()).unwrap()
    }

    #[test]
    fn matrix_entries() {
        let d: f64 = 1.3;
        let a = peakon_matrix(&state(&[1.0, 2.0], &[0.0, d])).0;
        let e = (-d / 2.0).exp();
        assert_eq!(a[(0, 0)], 1.0);
        assert_eq!(a[(1, 1)], 2.0);
        assert_relative_eq!(a[(0, 1)], 2.0 * e, max_relative = 1e-15);
        assert_relative_eq!(a[(1, 0)], e, max_relative = 1e-15);
        assert_eq!(peakon_matrix(&state(&[0.7], &[3.0])).0[(0, 0)], 0.7);
    }

    #[test]
    fn jacobi_small_cases() {
        let (vals, _) = symmetric_eigen(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!(vals, vec![1.0; 4]);
        let (vals, vecs) = symmetric_eigen(&DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 3.0])).unwrap();
        assert_relative_eq!(vals[0], 2.5, max_relative = 1e-14);
        assert_relative_eq!(vals[1], 3.5, max_relative = 1e-14);
        assert_relative_eq!((vecs.transpose() * &vecs), DMatrix::identity(2, 2), epsilon = 1e-14);
        assert!(symmetric_eigen(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn two_peakon_quadratic() {
        let (p1, p2, d) = (1.0f64, 2.0f64, 0.8f64);
        let sp = spectrum(&state(&[p1, p2], &[0.0, d])).unwrap();
        let tr = p1 + p2;
        let det = p1 * p2 * (1.0 - (-d).exp());
        let disc = (tr * tr - 4.0 * det).sqrt();
        assert_relative_eq!(sp.lambda[0], 2.0 * det / (tr + disc), max_relative = 1e-12);
        assert_relative_eq!(sp.lambda[1], 0.5 * (tr + disc), max_relative = 1e-12);
    }

    #[test]
    fn far_apart_limit() {
        let sp = spectrum(&state(&[2.0, 0.5, 1.0], &[0.0, 100.0, 200.0])).unwrap();
        assert_relative_eq!(sp.lambda[0], 0.5, max_relative = 1e-14);
        assert_relative_eq!(sp.lambda[1], 1.0, max_relative = 1e-14);
        assert_relative_eq!(sp.lambda[2], 2.0, max_relative = 1e-14);
    }

    #[test]
    fn eigenpairs_satisfy_relation() {
        let s = state(&[1.0, 0.3, 2.2, 0.9], &[-1.0, 0.2, 0.5, 3.0]);
        let pairs = eigenpairs(&s).unwrap();
        for (l, v) in pairs.lambda.iter().zip(&pairs.vectors) {
            assert!(eigen_residual(&s, *l, v).unwrap() <= 1e-9);
            assert!(eigen_residual(&s, *l + 0.1, v).unwrap() >= 0.1 * v.iter().fold(0.0f64, |m, x| m.max(x.abs())) * 0.5);
        }
        let one = state(&[1.4], &[0.0]);
        assert_eq!(eigen_residual(&one, 1.4, &[1.0]).unwrap(), 0.0);
        assert!(eigen_residual(&one, 1.4, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn json_shape() {
        let sp = Spectrum { lambda: vec![1.0, 2.5] };
        assert_eq!(serde_json::to_string(&sp).unwrap(), r#"{"lambda":[1.0,2.5]}"#);
    }
}
