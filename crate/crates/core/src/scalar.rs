//! Scalar abstraction for the kernels that do not care about precision.

use num_traits::{Float, FloatConst, FromPrimitive};
use std::fmt::{Debug, Display};

pub trait Real: Float + FloatConst + FromPrimitive + Debug + Display + Send + Sync + 'static {
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("integer representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}
