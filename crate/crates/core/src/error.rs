use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unstable Mathieu parameters (a = {a:e}, q = {q:e}): no bounded motion")]
    UnstableRegion { a: f64, q: f64 },

    #[error("crystal relaxation did not converge after {steps} steps (max force {max_force:e})")]
    NonConvergence { steps: usize, max_force: f64 },

    #[error("self-consistent micromotion loop did not converge after {iterations} iterations (last shift {last_shift:e} μm)")]
    SelfConsistencyFailed { iterations: usize, last_shift: f64 },

    #[error("ions {i} and {j} collided (distance {distance:e} μm)")]
    CollisionDetected { i: usize, j: usize, distance: f64 },

    #[error("ions {i} and {j} coincide")]
    CoincidentIons { i: usize, j: usize },

    #[error("drive resonant with harmonic {n}: a = {a:e}")]
    ResonantDrive { a: f64, n: usize },

    #[error("transverse mode {mode} has negative squared frequency {omega_sq:e}")]
    ImaginaryFrequency { mode: usize, omega_sq: f64 },

    #[error("mode sets cannot be matched: best overlap {overlap:.4} for mode {mode}")]
    AmbiguousMatching { mode: usize, overlap: f64 },

    #[error("conditional phase of +π/4 is unreachable at this detuning")]
    InfeasiblePhase,

    #[error("ion index {index} out of range for a crystal of {n} ions")]
    IonIndex { index: usize, n: usize },

    #[error("ion {index} ran away to |r| = {radius:e} μm")]
    Runaway { index: usize, radius: f64 },

    #[error("trajectory did not settle within {periods} rf periods (last change {change:e} μm)")]
    NoSettle { periods: usize, change: f64 },

    #[error("Fock truncation too small: thermal tail mass {tail:e}")]
    TruncationTooSmall { tail: f64 },

    #[error("{0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
