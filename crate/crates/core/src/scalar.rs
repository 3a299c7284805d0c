//! Scalar abstraction shared by every numeric kernel in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type usable for KPI values, thresholds and centroids.
///
/// Implemented for `f32` and `f64`. `Display` must produce the shortest
/// text that parses back to the same value, which both primitive floats do.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + FromStr + Display + Debug + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal (thresholds, ranges, table values).
    fn lit(value: f64) -> Self {
        Self::from_f64(value).unwrap_or_else(Self::nan)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn parse_text(text: &str) -> Option<Self> {
        text.trim().parse::<Self>().ok()
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + FromStr
        + Display
        + Debug
        + Default
        + Sum
        + Send
        + Sync
        + 'static
{
}
