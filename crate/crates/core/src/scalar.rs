//! Scalar abstraction shared by the geometric and kernel code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the numeric core is generic over (`f32` or `f64`).
pub trait Real: Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real")
    }

    /// Widens to `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real widens to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts a count into the scalar type.
pub fn from_count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count fits in scalar")
}
