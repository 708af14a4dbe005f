//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable by tensors, the tape and the optimizer: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant, panicking only for values no float can hold.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    /// Rounds to the nearest single-precision value (the checkpoint storage precision).
    fn round_to_storage(self) -> Self {
        Self::from_f32(self.to_f32().unwrap_or(f32::NAN)).unwrap_or(self)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
