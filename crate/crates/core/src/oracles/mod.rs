//! Independent brute-force verifiers for the analytic shortcuts used by the
//! main pipeline.

pub mod eom;
pub mod floquet;
pub mod fock;
pub mod suite;

pub use eom::{
    breathing_seed, integrate_full_eom, orbit_harmonic, trajectory_deviation, FullEomOptions,
    TrajectoryRecord,
};
pub use floquet::{floquet_exponent, stability_boundary_q, FloquetReport};
pub use fock::fock_fidelity;
pub use suite::{
    fidelity_sweep, fock_levels, trajectory_check, trap_exponent_sweep, Deviation, TrajectoryCheck,
};
