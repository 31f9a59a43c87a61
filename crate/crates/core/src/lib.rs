//! Planar Paul-trap ion crystals: Mathieu stability, pseudopotential
//! equilibria, self-consistent in-plane micromotion, transverse phonon modes
//! and segmented-pulse two-qubit gates, plus brute-force oracles for each
//! analytic shortcut.
//!
//! Units throughout: μm, μs, atomic mass units and elementary charges.
//! Everything numeric is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the usual double-precision flavour.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coulomb;
pub mod crystal;
pub mod error;
pub mod gate;
pub mod micromotion;
pub mod modes;
pub mod oracles;
pub mod scalar;
pub mod trap;
pub mod units;

pub use error::{Error, Result};

pub type Units = units::UnitSystem<f64>;
pub type Trap = trap::TrapConfig<f64>;
pub type Mathieu = trap::MathieuParams<f64>;
pub type Crystal = crystal::CrystalState<f64>;
pub type Micromotion = micromotion::MicromotionExpansion<f64>;
pub type Modes = modes::TransverseModeSet<f64>;
pub type ModeShifts = modes::ModeShiftReport<f64>;
pub type GateSettings = gate::GateConfig<f64>;
pub type Gate = gate::GateProblem<f64>;
pub type Pulse = gate::PulseSolution<f64>;
pub type Scan = gate::ScanTable<f64>;
pub type Budget = gate::ErrorBudget<f64>;
