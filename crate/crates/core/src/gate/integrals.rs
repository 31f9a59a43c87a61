//! Closed-form segment integrals of exponentials via divided differences of
//! exp, evaluated so that nearly coincident nodes do not cancel.

use nalgebra::Complex;

use crate::scalar::{cabs, cexp, Real};

type C<T> = Complex<T>;

/// sinh(d)/d for complex d.
fn sinhc<T: Real>(d: C<T>) -> C<T> {
    if cabs(d) < T::lit(0.1) {
        let d2 = d * d;
        // Horner form of 1 + d²/3! + d⁴/5! + d⁶/7! + d⁸/9!
        let mut s = C::new(T::lit(1.0 / 362880.0), T::zero());
        for c in [1.0 / 5040.0, 1.0 / 120.0, 1.0 / 6.0, 1.0] {
            s = s * d2 + C::new(T::lit(c), T::zero());
        }
        s
    } else {
        let sh = C::new(d.re.sinh() * d.im.cos(), d.re.cosh() * d.im.sin());
        sh / d
    }
}

/// exp[z₀, z₁] = (e^{z₀} − e^{z₁})/(z₀ − z₁).
pub fn exp_dd1<T: Real>(z0: C<T>, z1: C<T>) -> C<T> {
    let two = T::lit(2.0);
    let m = (z0 + z1) / two;
    let d = (z0 - z1) / two;
    cexp(m) * sinhc(d)
}

/// exp[z₀, z₁, z₂], the second divided difference.
pub fn exp_dd2<T: Real>(z0: C<T>, z1: C<T>, z2: C<T>) -> C<T> {
    let d01 = cabs(z0 - z1);
    let d02 = cabs(z0 - z2);
    let d12 = cabs(z1 - z2);
    let spread = d01.max(d02).max(d12);
    if spread < T::lit(0.5) {
        let m = (z0 + z1 + z2) / T::lit(3.0);
        let (a, b, c) = (z0 - m, z1 - m, z2 - m);
        // Σ_k h_k(a, b, c)/(k+2)!, h_k complete homogeneous polynomials
        let (mut h1, mut h2, mut h3) = (
            C::new(T::one(), T::zero()),
            C::new(T::one(), T::zero()),
            C::new(T::one(), T::zero()),
        );
        let mut fact = T::lit(2.0);
        let mut sum = h3 / fact;
        for k in 1..24 {
            h1 *= a;
            h2 = h2 * b + h1;
            h3 = h3 * c + h2;
            fact *= T::from_usize_lossy(k + 2);
            sum += h3 / fact;
        }
        return cexp(m) * sum;
    }
    // divide by the widest pair
    let (a, b, c) = if d02 >= d01 && d02 >= d12 {
        (z0, z1, z2)
    } else if d01 >= d12 {
        (z0, z2, z1)
    } else {
        (z1, z0, z2)
    };
    (exp_dd1(a, b) - exp_dd1(b, c)) / (a - c)
}

/// ∫_{t₀}^{t₀+Δ} e^{iλt} dt.
pub fn segment_exp<T: Real>(lambda: T, t0: T, width: T) -> C<T> {
    let z = C::new(T::zero(), lambda * width);
    cexp(C::new(T::zero(), lambda * t0)) * exp_dd1(z, C::new(T::zero(), T::zero())) * width
}

/// ∫∫_{t₀<t₁<t₂<t₀+Δ} e^{iλ₂t₂} e^{iλ₁t₁} dt₁ dt₂.
pub fn segment_triangle<T: Real>(lambda2: T, lambda1: T, t0: T, width: T) -> C<T> {
    let zero = C::new(T::zero(), T::zero());
    let dd = exp_dd2(
        zero,
        C::new(T::zero(), lambda2 * width),
        C::new(T::zero(), (lambda1 + lambda2) * width),
    );
    cexp(C::new(T::zero(), (lambda1 + lambda2) * t0)) * dd * (width * width)
}
