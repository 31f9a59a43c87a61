//! Internal unit system: micrometre, microsecond, unified atomic mass unit,
//! elementary charge.
//!
//! Frequencies are angular (rad/μs). Energies come out in u·μm²/μs² and forces
//! in u·μm/μs².

use crate::scalar::Real;

/// Elementary charge, C (exact since 2019).
pub const ELEMENTARY_CHARGE_SI: f64 = 1.602_176_634e-19;
/// Vacuum permittivity, F/m (CODATA 2018).
pub const VACUUM_PERMITTIVITY_SI: f64 = 8.854_187_812_8e-12;
/// Unified atomic mass unit, kg (CODATA 2018).
pub const ATOMIC_MASS_UNIT_SI: f64 = 1.660_539_066_60e-27;
/// Reduced Planck constant, J·s (exact).
pub const HBAR_SI: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K (exact).
pub const BOLTZMANN_SI: f64 = 1.380_649e-23;

/// Conversion constants in the internal unit system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitSystem<T> {
    /// e²/4πε₀ in u·μm³/μs².
    pub coulomb: T,
    /// Energy of one elementary charge across one volt, u·μm²/μs².
    pub volt_energy: T,
    /// ħ in u·μm²/μs.
    pub hbar: T,
    /// k_B/ħ in rad/(μs·K).
    pub kb_over_hbar: T,
}

impl<T: Real> UnitSystem<T> {
    pub fn new() -> Self {
        let e = ELEMENTARY_CHARGE_SI;
        let u = ATOMIC_MASS_UNIT_SI;
        // J·m = kg·m³/s²  ->  u·μm³/μs²: (1/u)·1e18·1e-12
        let coulomb = e * e / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY_SI) / u * 1e6;
        // J = kg·m²/s²  ->  u·μm²/μs²: (1/u)·1e12·1e-12
        let volt_energy = e / u;
        // J·s = kg·m²/s  ->  u·μm²/μs: (1/u)·1e12·1e-6
        let hbar = HBAR_SI / u * 1e6;
        let kb_over_hbar = BOLTZMANN_SI / HBAR_SI * 1e-6;
        Self {
            coulomb: T::lit(coulomb),
            volt_energy: T::lit(volt_energy),
            hbar: T::lit(hbar),
            kb_over_hbar: T::lit(kb_over_hbar),
        }
    }

    /// k_B·T/ħ (rad/μs) for a temperature in kelvin.
    pub fn thermal_rate(&self, kelvin: T) -> T {
        self.kb_over_hbar * kelvin
    }
}

impl<T: Real> Default for UnitSystem<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// 2π·(value in MHz) -> rad/μs.
pub fn mhz_to_angular<T: Real>(mhz: T) -> T {
    T::two_pi() * mhz
}

/// rad/μs -> MHz.
pub fn angular_to_mhz<T: Real>(omega: T) -> T {
    omega / T::two_pi()
}
