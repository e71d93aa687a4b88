//! Scalar abstraction shared by every numeric module.
//!
//! All channel, beamforming and optimizer code is written against [`Real`],
//! which is implemented for `f32` and `f64`. Complex quantities are
//! `nalgebra::Complex<T>`.

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable throughout the crate (`f32` or `f64`).
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    <T as FromPrimitive>::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a count into `T`.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    <T as FromPrimitive>::from_usize(n).expect("count representable in scalar type")
}

/// Lossless-enough conversion back to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    ToPrimitive::to_f64(&x).unwrap_or(f64::NAN)
}

/// `e^{j theta}`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Squared magnitude of a complex number.
#[inline]
pub fn norm_sqr<T: Real>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}

/// Magnitude of a complex number.
#[inline]
pub fn modulus<T: Real>(z: Complex<T>) -> T {
    norm_sqr(z).sqrt()
}

/// Positive infinity in `T`.
#[inline]
pub fn infinity<T: Real>() -> T {
    lit(f64::INFINITY)
}

#[inline]
pub fn is_finite<T: Real>(x: T) -> bool {
    to_f64(x).is_finite()
}
