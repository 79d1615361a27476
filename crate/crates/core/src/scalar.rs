//! Floating-point scalar abstraction for the numeric kernels.

use num_traits::{Float, FromPrimitive, NumAssignOps};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Scalar type the analytics and variate kernels are generic over.
///
/// Only `f32` and `f64` implement it; the blanket bounds are everything the
/// kernels actually use, so downstream code never needs extra `where` clauses.
pub trait Real:
    Float + FromPrimitive + NumAssignOps + Sum + Debug + Display + Send + Sync + 'static
{
    /// Conversion from an `f64` draw or constant. Precision loss for `f32`
    /// is accepted; every value fed through here is finite and moderate.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}
