//! Exact rational coordinates in `[0, 1)`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;

use crate::{Error, Result};

/// A coordinate `numerator / denominator` in `[0, 1)`, always in lowest terms.
///
/// Shifted Halton coordinates such as `t + 1/(2 p^m)` are not p-adic rationals
/// for odd `p`, so they are carried here rather than as digit vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExactPoint {
    numerator: u64,
    denominator: u64,
}

impl ExactPoint {
    pub const ZERO: ExactPoint = ExactPoint {
        numerator: 0,
        denominator: 1,
    };

    pub fn new(numerator: u64, denominator: u64) -> Result<Self> {
        if denominator == 0 {
            return Err(Error::InvalidArgument("zero denominator".into()));
        }
        if numerator >= denominator {
            return Err(Error::OutOfRange(format!(
                "{numerator}/{denominator} is not in [0,1)"
            )));
        }
        let g = numerator.gcd(&denominator);
        Ok(ExactPoint {
            numerator: numerator / g,
            denominator: denominator / g,
        })
    }

    pub fn numerator(&self) -> u64 {
        self.numerator
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

impl Ord for ExactPoint {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = self.numerator as u128 * other.denominator as u128;
        let rhs = other.numerator as u128 * self.denominator as u128;
        lhs.cmp(&rhs)
    }
}

impl PartialOrd for ExactPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ExactPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

impl FromStr for ExactPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse fraction {s:?}"));
        let s = s.trim();
        match s.split_once('/') {
            Some((a, b)) => {
                let a = a.trim().parse().map_err(|_| bad())?;
                let b = b.trim().parse().map_err(|_| bad())?;
                ExactPoint::new(a, b)
            }
            None => ExactPoint::new(s.parse().map_err(|_| bad())?, 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_to_lowest_terms() {
        let x = ExactPoint::new(6, 18).unwrap();
        assert_eq!((x.numerator(), x.denominator()), (1, 3));
        assert_eq!(ExactPoint::new(0, 7).unwrap(), ExactPoint::ZERO);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(ExactPoint::new(3, 3).is_err());
        assert!(ExactPoint::new(1, 0).is_err());
    }

    #[test]
    fn ordering_and_parse() {
        let a: ExactPoint = "1/3".parse().unwrap();
        let b: ExactPoint = "3/8".parse().unwrap();
        assert!(a < b);
        assert_eq!(b.to_string(), "3/8");
        assert!("2/1".parse::<ExactPoint>().is_err());
    }
}
