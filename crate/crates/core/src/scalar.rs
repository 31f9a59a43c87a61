//! Scalar abstraction shared by all numerical routines.
//!
//! Everything in the crate is written against [`Real`], which is satisfied by
//! `f32` and `f64`. The physics pipeline is only expected to meet its
//! tolerances in `f64`; `f32` is useful for quick exploratory runs.

use std::fmt::{Debug, LowerExp};

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable by the crate: f32 or f64.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + LowerExp + Debug {
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count or index.
    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Absolute value (avoids the `Signed`/`ComplexField` method ambiguity).
    #[inline]
    fn mag(self) -> Self {
        <Self as nalgebra::ComplexField>::abs(self)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// e^{iθ}
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Complex exponential for a generic real field.
#[inline]
pub fn cexp<T: Real>(z: Complex<T>) -> Complex<T> {
    let r = z.re.exp();
    Complex::new(r * z.im.cos(), r * z.im.sin())
}

#[inline]
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// Maximum of two reals, NaN-agnostic.
#[inline]
pub fn fmax<T: Real>(a: T, b: T) -> T {
    if a >= b {
        a
    } else {
        b
    }
}

#[inline]
pub fn fmin<T: Real>(a: T, b: T) -> T {
    if a <= b {
        a
    } else {
        b
    }
}
