//! Monodromy-matrix route to the Mathieu characteristic exponent.

use crate::scalar::Real;

/// Integration steps per period ξ ∈ [0, π].
pub const STEPS_PER_PERIOD: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FloquetReport<T> {
    /// Exponent folded into [0, 1]; `None` when unstable.
    pub beta: Option<T>,
    /// trace(M)/2 = cos(πβ)
    pub half_trace: T,
    /// det(M); equals 1 for the undamped equation.
    pub determinant: T,
}

impl<T: Real> FloquetReport<T> {
    pub fn stable(&self) -> bool {
        self.beta.is_some()
    }
}

/// One RK4 step of y'' = −(a − 2q cos 2ξ) y.
fn rk4_step<T: Real>(a: T, q: T, xi: T, h: T, y: [T; 2]) -> [T; 2] {
    let two = T::lit(2.0);
    let f = |x: T, s: [T; 2]| -> [T; 2] { [s[1], -(a - two * q * (two * x).cos()) * s[0]] };
    let half = h / two;
    let k1 = f(xi, y);
    let k2 = f(xi + half, [y[0] + half * k1[0], y[1] + half * k1[1]]);
    let k3 = f(xi + half, [y[0] + half * k2[0], y[1] + half * k2[1]]);
    let k4 = f(xi + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
    let six = T::lit(6.0);
    [
        y[0] + h / six * (k1[0] + two * k2[0] + two * k3[0] + k4[0]),
        y[1] + h / six * (k1[1] + two * k2[1] + two * k3[1] + k4[1]),
    ]
}

/// Integrates the homogeneous Mathieu equation over one period for the two
/// fundamental solutions and reads β off the monodromy eigenvalues.
pub fn floquet_exponent<T: Real>(a: T, q: T) -> FloquetReport<T> {
    let h = T::pi() / T::from_usize_lossy(STEPS_PER_PERIOD);
    let mut u = [T::one(), T::zero()];
    let mut v = [T::zero(), T::one()];
    for step in 0..STEPS_PER_PERIOD {
        let xi = h * T::from_usize_lossy(step);
        u = rk4_step(a, q, xi, h, u);
        v = rk4_step(a, q, xi, h, v);
    }
    let half_trace = (u[0] + v[1]) / T::lit(2.0);
    let determinant = u[0] * v[1] - v[0] * u[1];
    let beta = if half_trace.mag() <= T::one() {
        // sin²(πβ/2) = (1 − cos πβ)/2 keeps small β well conditioned
        let s = (T::one() - half_trace) / T::lit(2.0);
        let two_over_pi = T::lit(2.0) / T::pi();
        Some(if s <= T::lit(0.5) {
            two_over_pi * s.sqrt().asin()
        } else {
            two_over_pi * (T::one() - s).sqrt().acos()
        })
    } else {
        None
    };
    FloquetReport {
        beta,
        half_trace,
        determinant,
    }
}

/// Locates the first stability boundary a = 0 edge in q by bisection on
/// |trace/2| = 1.
pub fn stability_boundary_q<T: Real>(a: T, mut lo: T, mut hi: T) -> T {
    for _ in 0..60 {
        let mid = (lo + hi) / T::lit(2.0);
        if floquet_exponent(a, mid).stable() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / T::lit(2.0)
}
