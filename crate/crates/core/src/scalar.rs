//! The floating-point abstraction every kernel in this crate is written against.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable by the matrix kernels, losses and information measures.
///
/// Implemented for `f32` and `f64`. Bound verification and training are
/// pinned to `f64` because their tolerances are stated in double precision.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Conversion from a count.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Threshold below which a row norm counts as zero.
    fn tiny_norm() -> Self {
        Self::of(1e-12)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
