//! Numerical experiments built on the core algebra and the flow.

pub mod asymptotics;
pub mod density;
pub mod identity;
pub mod monotonicity;
pub mod rng;
pub mod stability;
pub mod tracking;
pub mod train;

pub use asymptotics::{run_asymptotics, AsymptoticsConfig, AsymptoticsReport, Limit};
pub use density::{approximate_from_density, density_distance, Component, Density, Histogram};
pub use identity::{check_energy_identity, energy_flux, IdentityCheck};
pub use monotonicity::{run_monotonicity, MonotonicityConfig, MonotonicityReport};
pub use rng::SplitMix64;
pub use stability::{run_stability, summarize_sweep, StabilityConfig, StabilityReport, SweepSummary};
pub use tracking::{locate_peaks, min_shift_distance, modulate, ShiftFit};
pub use train::{InitialData, MicroPeakon, Perturbation, TrainSpec};
