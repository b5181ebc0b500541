//! Weighted energy identity along the flow:
//!
//!   d/dt ∫ (u² + u_x²) g = ∫ u u_x² g' + ∫ u g' (1 - ∂²)^{-1}(2u² + u_x²)
//!
//! checked by a central difference in time.

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, PeakonState};
use crate::error::{PeakonError, Result};
use crate::functionals::weighted_energy;
use crate::pwexp::PiecewiseExp;
use crate::weight::WeightProfile;

/// Integration tolerance for the two short flows of the difference quotient.
pub const IDENTITY_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Right-hand side at a single state.
pub fn energy_flux(s: &PeakonState, w: &WeightProfile) -> Result<f64> {
    let u = s.field();
    let pu = PiecewiseExp::from_field(&u);
    let px = PiecewiseExp::from_field_slope(&u);
    let ux2 = px.mul(&px);
    let cubic = pu.mul(&ux2);
    let source = pu.mul(&pu).scaled(2.0).add(&ux2);
    let smoothed = source.helmholtz_inverse()?;
    let coupled = pu.mul(&smoothed);
    Ok(w.integrate(&cubic, 1) + w.integrate(&coupled, 1))
}

pub fn check_energy_identity(s: &PeakonState, w: &WeightProfile, h: f64) -> Result<IdentityCheck> {
    if !(1e-5..=1e-2).contains(&h) {
        return Err(PeakonError::Domain(format!("step {h} outside [1e-5, 1e-2]")));
    }
    s.validate()?;
    let plus = integrate(s, s.t + h, IDENTITY_TOL)?;
    let minus = integrate(s, s.t - h, IDENTITY_TOL)?;
    let ip = weighted_energy(&plus.last().field(), w);
    let im = weighted_energy(&minus.last().field(), w);
    let lhs = (ip - im) / (2.0 * h);
    let rhs = energy_flux(s, w)?;
    Ok(IdentityCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_weight_is_conservation() {
        let s = PeakonState::new(0.0, vec![1.0, 0.5], vec![0.0, 1.0]).unwrap();
        let r = check_energy_identity(&s, &WeightProfile::unit(), 1e-4).unwrap();
        assert_eq!(r.rhs, 0.0);
        assert!(r.residual <= 1e-8, "{r:?}");
    }

    #[test]
    fn far_weight_single_peakon() {
        let s = PeakonState::new(0.0, vec![1.0], vec![0.0]).unwrap();
        let w = WeightProfile::psi(200.0, 4.0).unwrap();
        let r = check_energy_identity(&s, &w, 1e-4).unwrap();
        assert!(r.residual <= 1e-6, "{r:?}");
    }

    #[test]
    fn two_peakons_second_order() {
        let s = PeakonState::new(0.0, vec![2.0, 1.0], vec![-1.0, 1.0]).unwrap();
        let w = WeightProfile::psi(0.5, 4.0).unwrap();
        let a = check_energy_identity(&s, &w, 1e-3).unwrap();
        let b = check_energy_identity(&s, &w, 5e-4).unwrap();
        assert!(a.residual <= 1e-5);
        let ratio = a.residual / b.residual;
        assert!((3.0..=5.0).contains(&ratio), "{a:?} {b:?}");
    }
}
