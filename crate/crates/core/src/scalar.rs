//! Scalar abstraction for the numerical core.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point type the solver is generic over: `f32` or `f64`.
///
/// Market data enters as `f64` and is converted once when a problem is
/// assembled. The default parameters (constraint tolerance `1e-8`, barrier
/// floors `1e-10`) assume double precision, so `f32` is mostly useful for
/// the linear-algebra kernels on their own.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant, panicking only if the value is not representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
