//! Scalar abstraction: all numeric code is generic over f32/f64.

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar for tensors, losses and the model.
///
/// f32 is the training default; f64 backs gradient checks and oracles.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an f64 constant into the scalar type.
#[inline]
pub fn s<S: Scalar>(v: f64) -> S {
    S::from_f64(v).expect("finite f64 converts to scalar")
}

/// Widens a scalar to f64.
#[inline]
pub fn f<S: Scalar>(v: S) -> f64 {
    v.to_f64().expect("scalar converts to f64")
}
