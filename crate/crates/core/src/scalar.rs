//! Scalar abstraction shared by every numerical module.
//!
//! The transfer-matrix and winding code only needs ordinary real arithmetic,
//! so it is written against [`Real`], a thin layer over `num_traits::Float`.
//! The bulk and strip Hamiltonians additionally go through nalgebra's dense
//! Hermitian eigensolver, which demands `nalgebra::RealField`; those paths are
//! bounded by [`SpectralReal`].
//!
//! Both traits are implemented for `f32` and `f64`. All tolerances quoted in
//! the tests are for `f64`.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar used throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Convert an integer index into `Self`.
    #[inline]
    fn from_index(i: usize) -> Self {
        <Self as FromPrimitive>::from_usize(i).expect("index representable")
    }

    /// Lossy conversion to `f64` for reporting and serialization.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Scalar that can also drive nalgebra's Hermitian eigensolver.
///
/// Both `Float` and `RealField` provide methods such as `sqrt` and `abs`, so
/// code bounded by this trait calls them through fully-qualified paths.
pub trait SpectralReal: Real + nalgebra::RealField {}

impl SpectralReal for f32 {}
impl SpectralReal for f64 {}
