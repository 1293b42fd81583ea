//! Scalar abstraction: all numeric kernels are generic over [`Real`],
//! instantiated as `f32` or `f64` (the crate-root aliases use `f64`).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar used throughout the numeric kernels.
pub trait Real:
    Float + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Convert an `f64` literal/configuration value into the working scalar.
#[inline]
pub fn real<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("value representable in scalar type")
}

/// Convert a `usize` count into the working scalar.
#[inline]
pub fn real_of<T: Real>(v: usize) -> T {
    T::from_usize(v).expect("count representable in scalar type")
}
