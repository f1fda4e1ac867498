//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar the library is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances given as `f64` literals are
/// converted with [`Real::tol`], which never drops below a small multiple of
/// the machine epsilon so that `f32` runs do not demand impossible accuracy.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("literal representable in scalar type")
    }

    /// A tolerance that is at least `64 * epsilon`.
    fn tol(x: f64) -> Self {
        let floor = Self::default_epsilon() * Self::lit(64.0);
        let t = Self::lit(x);
        if t > floor {
            t
        } else {
            floor
        }
    }

    /// Lossy conversion used for reporting.
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over a [`Real`] scalar.
pub type C<T> = Complex<T>;

/// Builds a complex number from two `f64` parts.
pub fn cplx<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(T::lit(re), T::lit(im))
}

/// Lifts a real scalar into the complex field.
pub fn re<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}
