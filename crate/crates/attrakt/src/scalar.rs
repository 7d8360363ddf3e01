//! Scalar abstraction for the numeric core.
//!
//! Everything downstream of the parser is generic over a floating-point
//! scalar; `f32` and `f64` both satisfy the bound. The crate root exports
//! `f64` aliases, which is what the solver is intended to run on.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar the toolkit is generic over.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + Debug + Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + NumAssign + FromPrimitive + Debug + Display + Send + Sync + 'static
{
}

/// Converts an `f64` literal into the working scalar type.
#[inline]
pub fn real<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("literal not representable in scalar type")
}
