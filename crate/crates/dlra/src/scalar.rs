//! Scalar abstraction: every kernel in this crate is generic over a real or
//! complex floating-point field. `f32`/`f64` and their complex counterparts
//! are supported; the crate root exposes `f64`-based aliases.

use num_complex::{Complex, ComplexFloat};
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Real field underlying a [`Scalar`].
pub trait RealScalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64` (exact for `f64` itself).
    #[inline]
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any real scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("real scalar converts to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize converts to a real scalar")
    }
}

impl RealScalar for f32 {}
impl RealScalar for f64 {}

/// Matrix entry type: a real or complex float with the handful of extra
/// operations the kernels need (conjugation comes from [`ComplexFloat`]).
pub trait Scalar:
    ComplexFloat<Real: RealScalar> + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// `true` for the complex instantiations.
    const IS_COMPLEX: bool;

    fn from_real(r: Self::Real) -> Self;

    /// Imaginary unit for complex types; zero for real ones.
    fn unit_im() -> Self;

    #[inline]
    fn from_f64(x: f64) -> Self {
        Self::from_real(<Self::Real as RealScalar>::from_f64_lossy(x))
    }

    /// Squared modulus, computed without a square root.
    #[inline]
    fn abs_sq(self) -> Self::Real {
        (self * self.conj()).re()
    }
}

impl Scalar for f32 {
    const IS_COMPLEX: bool = false;
    #[inline]
    fn from_real(r: f32) -> f32 {
        r
    }
    #[inline]
    fn unit_im() -> f32 {
        0.0
    }
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;
    #[inline]
    fn from_real(r: f64) -> f64 {
        r
    }
    #[inline]
    fn unit_im() -> f64 {
        0.0
    }
}

impl<R: RealScalar> Scalar for Complex<R>
where
    Complex<R>: ComplexFloat<Real = R>,
{
    const IS_COMPLEX: bool = true;
    #[inline]
    fn from_real(r: R) -> Self {
        Complex::new(r, R::zero())
    }
    #[inline]
    fn unit_im() -> Self {
        Complex::new(R::zero(), R::one())
    }
}

/// Marker for scalars with a genuine imaginary unit. Problems that are
/// intrinsically complex-valued (the cubic Schrödinger benchmark) require it.
pub trait ComplexScalar: Scalar {}

impl<R: RealScalar> ComplexScalar for Complex<R> where Complex<R>: ComplexFloat<Real = R> {}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn real_and_complex_roundtrip() {
        assert_eq!(<f64 as Scalar>::from_f64(2.5), 2.5);
        assert_eq!(<Complex64 as Scalar>::from_f64(2.5), Complex64::new(2.5, 0.0));
        assert_eq!(f64::unit_im(), 0.0);
        assert_eq!(Complex64::unit_im() * Complex64::unit_im(), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn abs_sq_matches_modulus() {
        let z = Complex64::new(3.0, -4.0);
        assert_eq!(z.abs_sq(), 25.0);
        assert_eq!((-3.0f64).abs_sq(), 9.0);
    }
}
