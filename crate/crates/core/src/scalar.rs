//! Scalar abstraction for the numeric core.
//!
//! Everything numeric in this crate is generic over [`Real`], a small
//! extension of `num_traits::Float`. The trait exists so the same kernels
//! instantiate at `f32` and `f64`; the training harness pins `f64` (the
//! identity tests in this workspace rely on 1e-9 .. 1e-12 tolerances that
//! single precision cannot hold).

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` constant into the working scalar type.
///
/// Panics if the conversion is not representable; for `f32`/`f64` it never
/// panics on finite input.
#[inline]
pub fn real<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("f64 constant not representable in scalar type")
}
