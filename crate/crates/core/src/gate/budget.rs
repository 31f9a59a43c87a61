use crate::scalar::Real;

/// Independent error contributions, each a probability or infidelity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorBudget<T> {
    /// Beam spill-over onto the neighbour, exp(−2(d/w)²).
    pub crosstalk: T,
    /// Thermal position spread, (π²/4)(δr/w)⁴.
    pub thermal_spread: T,
    /// Beyond-Lamb-Dicke correction, π²η⁴(n̄² + n̄ + 1/8).
    pub lamb_dicke: T,
    /// Neglected third order of the micromotion expansion, |q|³.
    pub micromotion_residual: T,
}

pub fn error_budget<T: Real>(
    nn_distance: T,
    waist: T,
    delta_r: T,
    eta: T,
    nbar: T,
    q: T,
) -> ErrorBudget<T> {
    let pi2 = T::pi() * T::pi();
    let r = nn_distance / waist;
    let s = delta_r / waist;
    ErrorBudget {
        crosstalk: (-T::lit(2.0) * r * r).exp(),
        thermal_spread: pi2 / T::lit(4.0) * s.powi(4),
        lamb_dicke: pi2 * eta.powi(4) * (nbar * nbar + nbar + T::lit(0.125)),
        micromotion_residual: q.mag().powi(3),
    }
}

/// η = Δk √(ħ/2mω).
pub fn lamb_dicke_parameter<T: Real>(dk: T, hbar: T, mass: T, omega: T) -> T {
    dk * (hbar / (T::lit(2.0) * mass * omega)).sqrt()
}

/// Classical thermal rms displacement √(k_BT/mω²) along x, y and combined.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalWidth<T> {
    pub x: T,
    pub y: T,
    pub combined: T,
}

/// `temperature` is k_BT/ħ.
pub fn thermal_width<T: Real>(
    temperature: T,
    hbar: T,
    mass: T,
    omega_x: T,
    omega_y: T,
) -> ThermalWidth<T> {
    let kt = hbar * temperature;
    let x2 = kt / (mass * omega_x * omega_x);
    let y2 = kt / (mass * omega_y * omega_y);
    ThermalWidth {
        x: x2.sqrt(),
        y: y2.sqrt(),
        combined: (x2 + y2).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::UnitSystem;

    #[test]
    fn worked_numbers() {
        let b = error_budget(7.0_f64, 3.0, 0.23, 0.029, 5.0, -0.0514);
        assert!(b.crosstalk < 2e-5 && b.crosstalk > 1.8e-5);
        assert!((b.thermal_spread - 0.85e-4).abs() < 0.05e-4);
        assert!((b.lamb_dicke - 2.1e-4).abs() < 0.1e-4);
        assert!((b.micromotion_residual - 1.36e-4).abs() < 0.01e-4);
    }

    #[test]
    fn eta_and_width() {
        let u = UnitSystem::<f64>::new();
        let wz = std::f64::consts::TAU * 2.2144;
        let eta = lamb_dicke_parameter(8.0, u.hbar, 171.0, wz);
        assert!((eta - 0.0292).abs() < 0.0003);
        let tw = thermal_width(std::f64::consts::TAU * 10.0, u.hbar, 171.0, 1.1443, 1.3896);
        assert!((tw.combined - 0.173).abs() < 0.002);
    }
}
