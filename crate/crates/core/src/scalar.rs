//! Scalar abstraction shared by every numeric module.
//!
//! The engine is written against [`Scalar`] so the same propagation and
//! bound code runs in `f64` (the default everywhere) or `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Round to nearest integer, ties to even.
    fn round_ties_even(self) -> Self;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Scalar for f32 {
    #[inline]
    fn round_ties_even(self) -> Self {
        f32::round_ties_even(self)
    }
}

impl Scalar for f64 {
    #[inline]
    fn round_ties_even(self) -> Self {
        f64::round_ties_even(self)
    }
}

/// Positive part `max(x, 0)`.
#[inline]
pub fn pos<S: Scalar>(x: S) -> S {
    if x > S::zero() {
        x
    } else {
        S::zero()
    }
}

/// Negative part `min(x, 0)`.
#[inline]
pub fn neg<S: Scalar>(x: S) -> S {
    if x < S::zero() {
        x
    } else {
        S::zero()
    }
}

#[inline]
pub fn relu<S: Scalar>(x: S) -> S {
    pos(x)
}
