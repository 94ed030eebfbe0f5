//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};

/// Complex amplitude over a real scalar.
pub type Complex<T> = num_complex::Complex<T>;

/// Real floating point type the simulation core is generic over (`f32` or `f64`).
///
/// Arithmetic and transcendental functions come from [`RealField`]; constants and
/// conversions from `num-traits`.
pub trait Real:
    RealField + Copy + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Lossy conversion to `f64` for reporting and I/O.
    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Machine epsilon.
    fn eps() -> Self;
}

impl Real for f32 {
    #[inline]
    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    #[inline]
    fn eps() -> Self {
        f64::EPSILON
    }
}

/// `exp(-i phi)`.
#[inline]
pub fn phase<T: Real>(phi: T) -> Complex<T> {
    Complex::new(phi.cos(), -phi.sin())
}

/// Squared modulus of a complex number.
#[inline]
pub fn abs2<T: Real>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}

/// Hermitian inner product `<x|y>`.
pub fn dot<T: Real>(x: &[Complex<T>], y: &[Complex<T>]) -> Complex<T> {
    debug_assert_eq!(x.len(), y.len());
    let mut re = T::zero();
    let mut im = T::zero();
    for (a, b) in x.iter().zip(y) {
        re += a.re * b.re + a.im * b.im;
        im += a.re * b.im - a.im * b.re;
    }
    Complex::new(re, im)
}

/// Euclidean norm of a complex vector.
pub fn norm<T: Real>(x: &[Complex<T>]) -> T {
    x.iter().fold(T::zero(), |acc, z| acc + abs2(*z)).sqrt()
}

/// `y += alpha * x`.
pub fn axpy<T: Real>(alpha: Complex<T>, x: &[Complex<T>], y: &mut [Complex<T>]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// Scales a complex vector in place.
pub fn scale<T: Real>(alpha: T, x: &mut [Complex<T>]) {
    for z in x.iter_mut() {
        z.re *= alpha;
        z.im *= alpha;
    }
}
