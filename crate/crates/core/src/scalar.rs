//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point sample type: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + rustfft::FftNum
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Significant decimal digits needed to round-trip a value through text.
    const ROUND_TRIP_DIGITS: usize;

    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    #[inline]
    fn two_pi() -> Self {
        Self::TAU()
    }
}

impl Scalar for f32 {
    const ROUND_TRIP_DIGITS: usize = 9;
}

impl Scalar for f64 {
    const ROUND_TRIP_DIGITS: usize = 17;
}

/// Formats a value with exactly enough significant digits to parse back bit-exact.
pub fn format_round_trip<T: Scalar>(v: T) -> String {
    format!("{:.*e}", T::ROUND_TRIP_DIGITS - 1, v)
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_two_pi<T: Scalar>(a: T) -> T {
    let tau = T::TAU();
    let r = a % tau;
    let r = if r < T::zero() { r + tau } else { r };
    if r >= tau {
        T::zero()
    } else {
        r
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_pi<T: Scalar>(a: T) -> T {
    let pi = T::PI();
    let w = wrap_two_pi(a + pi) - pi;
    if w <= -pi {
        w + T::TAU()
    } else {
        w
    }
}

/// Absolute angular distance on the circle, in `[0, π]`.
pub fn angular_distance<T: Scalar>(a: T, b: T) -> T {
    wrap_pi(a - b).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_formatting_is_exact() {
        for v in [0.1f32, 1.0 / 3.0, 123456.79, 1e-30, f32::MAX] {
            let s = format_round_trip(v);
            assert_eq!(s.parse::<f32>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        for v in [0.1f64, 1.0 / 3.0, std::f64::consts::PI, 5e-300] {
            let s = format_round_trip(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        // f32 uses nine significant digits
        assert_eq!(format_round_trip(1.5f32), "1.50000000e0");
    }

    #[test]
    fn angle_wrapping() {
        use std::f64::consts::PI;
        assert!((wrap_two_pi(-0.5f64) - (2.0 * PI - 0.5)).abs() < 1e-12);
        assert_eq!(wrap_two_pi(2.0 * PI), 0.0);
        assert!((wrap_pi(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_pi(-PI) - PI).abs() < 1e-12);
        assert!((angular_distance(0.1, 2.0 * PI - 0.1) - 0.2).abs() < 1e-12);
    }
}
