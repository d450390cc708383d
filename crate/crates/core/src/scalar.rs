//! Floating-point abstraction for the math kernels.
//!
//! Conversions, distances, and statistics are generic over [`Scalar`] so they
//! run in `f32` or `f64`; the data model itself is fixed to [`crate::Real`].

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive};

/// Float scalar usable by every numeric kernel in this crate.
pub trait Scalar: Float + FromPrimitive + AddAssign + Sum + Debug + Display + 'static {
    /// Converts an `f64` constant. Panics only for types that cannot
    /// represent ordinary constants, which no `Float` implementor does.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("float constant conversion")
    }
}

impl<T> Scalar for T where T: Float + FromPrimitive + AddAssign + Sum + Debug + Display + 'static {}
