pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod functionals;
pub mod pwexp;
pub mod spectral;
pub mod sum;
pub mod weight;

pub use dynamics::{hamiltonian, integrate, integrate_at, rhs, PeakonState, Trajectory};
pub use error::{PeakonError, Result};
pub use field::{h1_dist, h1_inner, PeakedField};
pub use functionals::{energy, helmholtz_inverse, moment_f, weighted_energy, weighted_f};
pub use spectral::{eigen_residual, eigenpairs, peakon_matrix, spectrum, symmetric_eigen, Spectrum};
pub use weight::{partition, psi, psi_scaled, Sigma0, WeightKind, WeightProfile};
