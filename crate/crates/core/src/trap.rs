//! Quadrupole trap: electrode settings to Mathieu parameters, characteristic
//! exponents and secular frequencies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::units::UnitSystem;

/// Cartesian axis index into the `[T; 3]` arrays below.
pub const X: usize = 0;
pub const Y: usize = 1;
pub const Z: usize = 2;

/// Secular frequency ratio ω_z / max(ω_x, ω_y) above which the crystal is
/// considered planar.
pub const PLANARITY_RATIO: f64 = 10.0;

/// Number of Floquet harmonics kept on each side of the Hill determinant.
/// The truncation error decays only like q²/(48·K³), so K has to be large
/// for 1e-10 accuracy; the recurrence is O(K) so this costs nothing.
const HILL_ORDER: usize = 1000;

/// Electrode voltages, drive and ion species.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig<T> {
    /// DC voltage U₀ (V).
    pub dc_voltage: T,
    /// AC amplitude V₀ (V).
    pub rf_voltage: T,
    /// Drive angular frequency Ω_T (rad/μs).
    pub rf_omega: T,
    /// Characteristic electrode size d₀ (μm).
    pub electrode_size: T,
    /// In-plane anisotropy γ.
    pub anisotropy: T,
    /// Ion mass (u).
    pub ion_mass: T,
    /// Ion charge (units of e).
    pub ion_charge: T,
    pub n_ions: usize,
}

impl<T: Real> TrapConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.rf_omega > T::zero()) {
            return bad("rf frequency must be positive");
        }
        if !(self.electrode_size > T::zero()) {
            return bad("electrode size must be positive");
        }
        if !(self.ion_mass > T::zero()) {
            return bad("ion mass must be positive");
        }
        if self.n_ions < 1 {
            return bad("need at least one ion");
        }
        if !(self.anisotropy.mag() < T::one()) {
            return bad("anisotropy must satisfy |γ| < 1");
        }
        if !self.dc_voltage.is_finite() || !self.rf_voltage.is_finite() {
            return bad("voltages must be finite");
        }
        Ok(())
    }

    /// e·U₀ in internal energy units.
    pub fn dc_energy(&self, units: &UnitSystem<T>) -> T {
        self.ion_charge * units.volt_energy * self.dc_voltage
    }

    /// e·V₀ in internal energy units.
    pub fn rf_energy(&self, units: &UnitSystem<T>) -> T {
        self.ion_charge * units.volt_energy * self.rf_voltage
    }

    /// m·d₀²·Ω_T², the common Mathieu denominator.
    fn mathieu_scale(&self) -> T {
        self.ion_mass * self.electrode_size * self.electrode_size * self.rf_omega * self.rf_omega
    }

    /// The trap used for the published 127-ion crystal: ¹⁷¹Yb⁺, U₀ = −1.1 V,
    /// V₀ = 90 V, Ω_T/2π = 50 MHz, d₀ = 200 μm, γ = 0.01.
    pub fn reference() -> Self {
        Self {
            dc_voltage: T::lit(-1.1),
            rf_voltage: T::lit(90.0),
            rf_omega: T::two_pi() * T::lit(50.0),
            electrode_size: T::lit(200.0),
            anisotropy: T::lit(0.01),
            ion_mass: T::lit(171.0),
            ion_charge: T::one(),
            n_ions: 127,
        }
    }
}

/// Dimensionless Mathieu coefficients per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MathieuCoefficients<T> {
    pub a: [T; 3],
    pub q: [T; 3],
}

impl<T: Real> MathieuCoefficients<T> {
    /// The in-plane q (q_x = q_y).
    pub fn q_planar(&self) -> T {
        self.q[X]
    }
}

/// Whether the secular frequencies produce a planar crystal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Planarity {
    Ok,
    /// ω_z / max(ω_x, ω_y) below [`PLANARITY_RATIO`]; the crystal may buckle.
    Warning,
}

/// Mathieu coefficients together with the characteristic exponents and
/// secular frequencies they imply.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MathieuParams<T> {
    pub a: [T; 3],
    pub q: [T; 3],
    pub beta: [T; 3],
    /// Secular angular frequencies (rad/μs).
    pub omega: [T; 3],
    pub planarity: Planarity,
}

impl<T: Real> MathieuParams<T> {
    pub fn from_config(cfg: &TrapConfig<T>, units: &UnitSystem<T>) -> Result<Self> {
        let coeffs = mathieu_parameters(cfg, units)?;
        secular_frequencies(&coeffs, cfg)
    }

    pub fn q_planar(&self) -> T {
        self.q[X]
    }

    /// ω_z / max(ω_x, ω_y).
    pub fn planarity_ratio(&self) -> T {
        self.omega[Z] / crate::scalar::fmax(self.omega[X], self.omega[Y])
    }
}

/// a_ν and q_ν for the three axes.
pub fn mathieu_parameters<T: Real>(
    cfg: &TrapConfig<T>,
    units: &UnitSystem<T>,
) -> Result<MathieuCoefficients<T>> {
    cfg.validate()?;
    let scale = cfg.mathieu_scale();
    let eu = cfg.dc_energy(units);
    let ev = cfg.rf_energy(units);
    let eight = T::lit(8.0);
    let gamma = cfg.anisotropy;
    let ax = eight * (T::one() + gamma) * eu / scale;
    let ay = eight * (T::one() - gamma) * eu / scale;
    // written as -(ax + ay) so the Laplace sum vanishes to rounding
    let az = -(ax + ay);
    let q = -T::lit(4.0) * ev / scale;
    Ok(MathieuCoefficients {
        a: [ax, ay, az],
        q: [q, q, -(q + q)],
    })
}

/// (sin y / y)² with a series near y = 0, as a function of y² (which may be
/// negative: then it is (sinh |y| / |y|)²).
fn sinc_sq_of_y2<T: Real>(y2: T) -> T {
    if y2.mag() < T::lit(1e-3) {
        let y4 = y2 * y2;
        T::one() - y2 / T::lit(3.0) + T::lit(2.0) * y4 / T::lit(45.0) - y4 * y2 / T::lit(315.0)
    } else if y2 > T::zero() {
        let y = y2.sqrt();
        let s = y.sin() / y;
        s * s
    } else {
        let y = (-y2).sqrt();
        let s = y.sinh() / y;
        s * s
    }
}

/// sin²(πβ/2) from the Hill determinant at zero exponent.
///
/// Uses sin²(πβ/2) = Δ(0)·sin²(π√a/2), with the n = 0 row of Δ(0)
/// multiplied through by −a so the result stays finite as a → 0.
pub fn hill_sin_sq<T: Real>(a: T, q: T) -> T {
    let four = T::lit(4.0);
    let gamma = |n: i64| -> T {
        if n == 0 {
            q
        } else {
            let nn = T::lit((n * n) as f64);
            q / (four * nn - a)
        }
    };
    let diag = |n: i64| -> T {
        if n == 0 {
            -a
        } else {
            T::one()
        }
    };
    let k = HILL_ORDER as i64;
    // three-term recurrence for the tridiagonal determinant
    let mut f_prev = T::one();
    let mut f = diag(-k);
    for n in (-k + 1)..=k {
        let next = diag(n) * f - gamma(n - 1) * gamma(n) * f_prev;
        f_prev = f;
        f = next;
    }
    let pi = T::pi();
    let y2 = pi * pi * a / four;
    // sin²(π√a/2)/a = (π²/4)(sin y / y)²
    let s = pi * pi / four * sinc_sq_of_y2(y2);
    -f * s
}

/// Characteristic exponent β ∈ [0, 1] of y'' + (a − 2q cos 2ξ) y = 0.
pub fn characteristic_exponent<T: Real>(a: T, q: T) -> Result<T> {
    let s = hill_sin_sq(a, q);
    let unstable = || Error::UnstableRegion {
        a: a.to_f64_lossy(),
        q: q.to_f64_lossy(),
    };
    if !s.is_finite() || s < T::zero() || s > T::one() {
        return Err(unstable());
    }
    let two_over_pi = T::lit(2.0) / T::pi();
    // asin is well conditioned for small β, acos near β = 1
    let beta = if s <= T::lit(0.5) {
        two_over_pi * s.sqrt().asin()
    } else {
        two_over_pi * (T::one() - s).sqrt().acos()
    };
    Ok(beta)
}

/// Growth exponent μ (per unit ξ) of the unbounded homogeneous solution
/// e^{μξ}; zero inside a stable region.
pub fn floquet_growth<T: Real>(a: T, q: T) -> T {
    let s = hill_sin_sq(a, q);
    let two_over_pi = T::lit(2.0) / T::pi();
    if s < T::zero() {
        two_over_pi * (-s).sqrt().asinh()
    } else if s > T::one() {
        two_over_pi * s.sqrt().acosh()
    } else {
        T::zero()
    }
}

/// Half-trace of the one-period monodromy matrix implied by the Hill
/// determinant, cos(πβ). |value| > 1 signals instability.
pub fn monodromy_half_trace<T: Real>(a: T, q: T) -> T {
    T::one() - T::lit(2.0) * hill_sin_sq(a, q)
}

/// Secular frequencies ω_ν = β_ν Ω_T / 2 and the planarity status.
pub fn secular_frequencies<T: Real>(
    coeffs: &MathieuCoefficients<T>,
    cfg: &TrapConfig<T>,
) -> Result<MathieuParams<T>> {
    let mut beta = [T::zero(); 3];
    let mut omega = [T::zero(); 3];
    for axis in [X, Y, Z] {
        beta[axis] = characteristic_exponent(coeffs.a[axis], coeffs.q[axis])?;
        omega[axis] = beta[axis] * cfg.rf_omega / T::lit(2.0);
    }
    let ratio = omega[Z] / crate::scalar::fmax(omega[X], omega[Y]);
    let planarity = if ratio >= T::lit(PLANARITY_RATIO) {
        Planarity::Ok
    } else {
        Planarity::Warning
    };
    Ok(MathieuParams {
        a: coeffs.a,
        q: coeffs.q,
        beta,
        omega,
        planarity,
    })
}
