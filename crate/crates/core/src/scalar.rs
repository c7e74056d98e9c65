//! Scalar abstraction shared by the geometric kernels.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar usable by the kinematics, geometry and fitting kernels (f32 or f64).
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Wraps an angle into (−π, π].
pub fn normalize_angle<T: Real>(theta: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut a = theta % two_pi;
    if a <= -T::PI() {
        a = a + two_pi;
    } else if a > T::PI() {
        a = a - two_pi;
    }
    a
}
