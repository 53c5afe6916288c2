//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the estimators are generic over (`f32` or `f64`).
///
/// Statistical tail probabilities are evaluated in `f64` regardless of `Self`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Default + std::fmt::Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts a count into `Self`.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the concrete type.
    fn eps() -> Self;

    /// Smallest positive normal value.
    fn tiny() -> Self;
}

impl Real for f32 {
    #[inline]
    fn eps() -> Self {
        f32::EPSILON
    }

    #[inline]
    fn tiny() -> Self {
        f32::MIN_POSITIVE
    }
}

impl Real for f64 {
    #[inline]
    fn eps() -> Self {
        f64::EPSILON
    }

    #[inline]
    fn tiny() -> Self {
        f64::MIN_POSITIVE
    }
}
