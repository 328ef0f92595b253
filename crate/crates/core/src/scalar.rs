use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point element type of hidden-state matrices: `f32` or `f64`.
///
/// Kernels read elements through [`Scalar::widen`] and accumulate in `f64`
/// regardless of the storage type.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Send + Sync + Debug + Default + 'static
{
    #[inline]
    fn widen(self) -> f64 {
        // Float -> f64 cannot fail for f32/f64.
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    #[inline]
    fn widen(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    #[inline]
    fn widen(self) -> f64 {
        self
    }
}
