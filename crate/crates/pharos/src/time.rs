//! Exact rational time.
//!
//! Timing theorems are stated as exact inequalities (entry spread at most one
//! network bound, finality at exactly two confirmations plus 2Δ, ...). Testing
//! them with floats would need tolerances that could mask off-by-one-delay
//! bugs, so simulation time is a rational number and every comparison is
//! exact.

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Sub};
use std::str::FromStr;

/// A point in simulated time (or a duration); an exact rational of i128.
///
/// The numerators that arise in practice stay tiny: delay draws have dyadic
/// denominators and round counts are in the thousands, so i128 never gets
/// close to overflow.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Time(Ratio<i128>);

impl Time {
    pub const ZERO: Time = Time(Ratio::new_raw(0, 1));

    /// `num/den` as a time value. Panics on a zero denominator.
    pub fn new(num: i128, den: i128) -> Time {
        Time(Ratio::new(num, den))
    }

    pub fn from_int(v: i128) -> Time {
        Time(Ratio::from_integer(v))
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    /// Closest f64, for human-facing output only.
    pub fn approx_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl Add for Time {
    type Output = Time;
    fn add(self, rhs: Time) -> Time {
        Time(self.0 + rhs.0)
    }
}

impl AddAssign for Time {
    fn add_assign(&mut self, rhs: Time) {
        self.0 += rhs.0;
    }
}

impl Sub for Time {
    type Output = Time;
    fn sub(self, rhs: Time) -> Time {
        Time(self.0 - rhs.0)
    }
}

impl Mul<i128> for Time {
    type Output = Time;
    fn mul(self, rhs: i128) -> Time {
        Time(self.0 * Ratio::from_integer(rhs))
    }
}

impl Div<i128> for Time {
    type Output = Time;
    fn div(self, rhs: i128) -> Time {
        Time(self.0 / Ratio::from_integer(rhs))
    }
}

impl fmt::Display for Time {
    /// Canonical form: `n` for integers, `n/d` otherwise. Stable across runs,
    /// so serialized metrics can be compared byte for byte.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self.0.denom() == 1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Error parsing a `Time` from its `n` or `n/d` string form.
#[derive(Debug, thiserror::Error)]
#[error("invalid time literal {0:?}")]
pub struct ParseTimeError(pub String);

impl FromStr for Time {
    type Err = ParseTimeError;

    fn from_str(s: &str) -> Result<Time, ParseTimeError> {
        let bad = || ParseTimeError(s.to_string());
        match s.split_once('/') {
            None => Ok(Time::from_int(s.trim().parse().map_err(|_| bad())?)),
            Some((n, d)) => {
                let num: i128 = n.trim().parse().map_err(|_| bad())?;
                let den: i128 = d.trim().parse().map_err(|_| bad())?;
                if den == 0 {
                    return Err(bad());
                }
                Ok(Time::new(num, den))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_arithmetic() {
        let third = Time::new(1, 3);
        assert_eq!(third + third + third, Time::from_int(1));
        assert_eq!(Time::new(1, 2) * 3, Time::new(3, 2));
        assert_eq!(Time::new(3, 2) / 3, Time::new(1, 2));
    }

    #[test]
    fn display_roundtrip() {
        for s in ["0", "7", "-3", "1/2", "-5/4"] {
            let t: Time = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
        // Non-canonical input parses to canonical form.
        assert_eq!("4/2".parse::<Time>().unwrap().to_string(), "2");
        assert!("1/0".parse::<Time>().is_err());
        assert!("x".parse::<Time>().is_err());
    }

    #[test]
    fn ordering_is_numeric() {
        assert!(Time::new(1, 3) < Time::new(1, 2));
        assert!(Time::new(2, 3) > Time::new(1, 2));
    }
}
