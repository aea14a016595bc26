//! Scalar abstraction: the whole crate is generic over the floating-point
//! type through [`Scalar`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::distr::uniform::SampleUniform;

/// Floating-point scalar usable everywhere in the crate: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + SampleUniform
    + Sum<Self>
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Parses a scalar from its decimal string form (CSV import).
    fn parse_scalar(text: &str) -> Result<Self, String>;
}

impl Scalar for f32 {
    fn parse_scalar(text: &str) -> Result<Self, String> {
        text.trim().parse().map_err(|e| format!("{e}: {text:?}"))
    }
}

impl Scalar for f64 {
    fn parse_scalar(text: &str) -> Result<Self, String> {
        text.trim().parse().map_err(|e| format!("{e}: {text:?}"))
    }
}

/// Shorthand for lifting an `f64` literal into the generic scalar type.
#[inline]
pub fn real<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("literal representable in scalar type")
}

/// Lifts a `usize` (dimension, agent count, round index) into the scalar type.
#[inline]
pub fn real_of<S: Scalar>(x: usize) -> S {
    S::from_usize(x).expect("count representable in scalar type")
}
