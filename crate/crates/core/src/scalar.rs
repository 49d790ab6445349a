//! Scalar abstraction: the numeric kernels are generic over the float width.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar usable throughout the crate (f32 or f64).
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
}

/// Converts an `f64` constant (tolerance, default parameter) into `S`.
///
/// Panics only if `S` cannot represent any finite `f64`, which cannot
/// happen for the supported float types.
pub fn sc<S: Real>(value: f64) -> S {
    S::from_f64(value).expect("finite f64 constant must convert")
}
