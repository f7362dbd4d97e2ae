//! Floating point abstraction shared by the sensor and controller math.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real-valued scalar the sensor models and the controller are generic over.
///
/// Implemented for `f32` and `f64`. The simulation loop, the safety engine and
/// the report run on `f64`; see the aliases at the crate root.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the literal is not representable,
    /// which cannot happen for the constants used in this crate.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Rounds ties towards positive infinity: `22.5 -> 23`, `-0.5 -> 0`.
    fn round_half_up(self) -> Self {
        (self + Self::lit(0.5)).floor()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
