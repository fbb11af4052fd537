//! Scalar abstraction shared by every kernel.
//!
//! Storage is generic; reductions (conv, dense, softmax, sums) always run in
//! an `f64` accumulator and are narrowed once per output element.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type of a [`Tensor`](crate::Tensor).
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Widen to the accumulator type.
    fn acc(self) -> f64;
    /// Narrow from the accumulator type (round-to-nearest).
    fn from_acc(x: f64) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn acc(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_acc(x: f64) -> Self {
        x as f32
    }
}

impl Scalar for f64 {
    #[inline]
    fn acc(self) -> f64 {
        self
    }
    #[inline]
    fn from_acc(x: f64) -> Self {
        x
    }
}
