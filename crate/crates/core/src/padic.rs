//! Exact base-p digit arithmetic on `[0, 1)`.
//!
//! A p-adic rational `x = z_0/p + z_1/p^2 + ... + z_{L-1}/p^L` is stored as
//! the digit vector `[z_0, z_1, ..., z_{L-1}]`: index `r` multiplies
//! `p^-(r+1)`. Under the Monna map the same vector is the p-adic integer
//! `z_0 + z_1 p + z_2 p^2 + ...`, so addition in `Z_p` carries from index `r`
//! to index `r + 1`, i.e. toward the *less* significant fractional digits.
//!
//! Only the finite representation of p-adic rationals is ever produced.

use crate::rational::ExactPoint;
use crate::{Error, Result};

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

pub(crate) fn check_prime(p: u64) -> Result<u32> {
    if p > u32::MAX as u64 || !is_prime(p) {
        return Err(Error::InvalidBase(p));
    }
    Ok(p as u32)
}

/// `p^m` with overflow checking.
pub fn checked_pow(p: u32, m: u32) -> Result<u64> {
    (p as u64).checked_pow(m).ok_or(Error::Overflow("p^m"))
}

/// Finite base-p digit vector in canonical form (no trailing zero digits).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PAdicDigits {
    base: u32,
    digits: Vec<u32>,
}

impl PAdicDigits {
    pub fn new(base: u32, digits: Vec<u32>) -> Result<Self> {
        check_prime(base as u64)?;
        if let Some(&digit) = digits.iter().find(|&&d| d >= base) {
            return Err(Error::InvalidDigit { digit, base });
        }
        Ok(Self::from_raw(base, digits))
    }

    fn from_raw(base: u32, mut digits: Vec<u32>) -> Self {
        while digits.last() == Some(&0) {
            digits.pop();
        }
        PAdicDigits { base, digits }
    }

    pub fn zero(base: u32) -> Result<Self> {
        Self::new(base, Vec::new())
    }

    /// The grid point `a / p^m` of `Q(p^m)`.
    pub fn from_numerator(base: u32, numerator: u64, m: u32) -> Result<Self> {
        check_prime(base as u64)?;
        let size = checked_pow(base, m)?;
        if numerator >= size {
            return Err(Error::OutOfRange(format!(
                "numerator {numerator} not below {base}^{m}"
            )));
        }
        // digit r of a/p^m is the coefficient of p^(m-1-r) in a
        let mut digits = vec![0u32; m as usize];
        let mut rest = numerator;
        for r in (0..m as usize).rev() {
            digits[r] = (rest % base as u64) as u32;
            rest /= base as u64;
        }
        Ok(Self::from_raw(base, digits))
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// Numerator `a` such that the value equals `a / p^m`. Requires `len() <= m`.
    pub fn numerator(&self, m: u32) -> Result<u64> {
        if self.len() > m as usize {
            return Err(Error::OutOfRange(format!(
                "{} digits do not fit in m = {m}",
                self.len()
            )));
        }
        checked_pow(self.base, m)?;
        let p = self.base as u64;
        let mut a = 0u64;
        for r in 0..m as usize {
            let z = self.digits.get(r).copied().unwrap_or(0) as u64;
            a = a * p + z;
        }
        Ok(a)
    }

    /// Keeps the first `m` digits.
    pub fn truncated(&self, m: u32) -> PAdicDigits {
        let keep = self.digits.len().min(m as usize);
        Self::from_raw(self.base, self.digits[..keep].to_vec())
    }

    pub fn to_exact(&self) -> Result<ExactPoint> {
        let m = self.len() as u32;
        ExactPoint::new(self.numerator(m)?, checked_pow(self.base, m)?)
    }

    /// Correctly rounded when `p^len` is below `2^53`, Horner evaluation
    /// from the least significant digit otherwise.
    pub fn to_f64(&self) -> f64 {
        let m = self.len() as u32;
        if let Ok(size) = checked_pow(self.base, m) {
            if size < 1 << 53 {
                if let Ok(a) = self.numerator(m) {
                    return a as f64 / size as f64;
                }
            }
        }
        let p = self.base as f64;
        self.digits
            .iter()
            .rev()
            .fold(0.0, |acc, &z| (acc + z as f64) / p)
    }
}

/// Radical inverse `phi_p(n)`: the base-p digits of `n` mirrored across the
/// radix point.
pub fn radical_inverse(p: u32, n: u64) -> Result<PAdicDigits> {
    check_prime(p as u64)?;
    let mut digits = Vec::new();
    let mut rest = n;
    while rest > 0 {
        digits.push((rest % p as u64) as u32);
        rest /= p as u64;
    }
    Ok(PAdicDigits::from_raw(p, digits))
}

/// Inverse Monna map `phi_p^+(x) = sum_r x_r p^r`.
pub fn monna_inverse(x: &PAdicDigits) -> Result<u64> {
    let p = x.base as u64;
    x.digits.iter().rev().try_fold(0u64, |acc, &z| {
        acc.checked_mul(p)
            .and_then(|v| v.checked_add(z as u64))
            .ok_or(Error::Overflow("monna inverse"))
    })
}

fn same_base(x: &PAdicDigits, sigma: &PAdicDigits) -> Result<u32> {
    if x.base != sigma.base {
        return Err(Error::BaseMismatch {
            left: x.base,
            right: sigma.base,
        });
    }
    Ok(x.base)
}

/// Digit-wise `Z_p` addition truncated to `width` digits (carry out dropped).
fn add_digits(p: u32, a: &[u32], b: &[u32], width: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(width);
    let mut carry = 0u32;
    for r in 0..width {
        let s = a.get(r).copied().unwrap_or(0) + b.get(r).copied().unwrap_or(0) + carry;
        out.push(s % p);
        carry = s / p;
    }
    out
}

/// p-adic shift `x (+)_p sigma = phi_p(phi_p^+(x) + phi_p^+(sigma))`.
///
/// Works digit-wise, so operands of any length are supported without
/// integer overflow.
pub fn padic_shift(x: &PAdicDigits, sigma: &PAdicDigits) -> Result<PAdicDigits> {
    let p = same_base(x, sigma)?;
    let width = x.len().max(sigma.len()) + 1;
    Ok(PAdicDigits::from_raw(
        p,
        add_digits(p, &x.digits, &sigma.digits, width),
    ))
}

/// Simplified shift: the p-adic shift truncated to its `m` most significant
/// digits, i.e. addition modulo `p^m` under the Monna map.
pub fn simplified_shift(x: &PAdicDigits, sigma: &PAdicDigits, m: u32) -> Result<PAdicDigits> {
    let p = same_base(x, sigma)?;
    if m == 0 {
        return Err(Error::InvalidArgument("m must be positive".into()));
    }
    Ok(PAdicDigits::from_raw(
        p,
        add_digits(p, &x.digits, &sigma.digits, m as usize),
    ))
}

/// Mid-simplified shift: the simplified shift moved to the centre of its
/// `p^-m` cell, `t + 1/(2 p^m)`.
pub fn mid_simplified_shift(x: &PAdicDigits, sigma: &PAdicDigits, m: u32) -> Result<ExactPoint> {
    let t = simplified_shift(x, sigma, m)?;
    let denom = checked_pow(t.base, m)?
        .checked_mul(2)
        .ok_or(Error::Overflow("2 p^m"))?;
    ExactPoint::new(2 * t.numerator(m)? + 1, denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(base: u32, digits: &[u32]) -> PAdicDigits {
        PAdicDigits::new(base, digits.to_vec()).unwrap()
    }

    fn frac(a: u64, b: u64) -> ExactPoint {
        ExactPoint::new(a, b).unwrap()
    }

    #[test]
    fn radical_inverse_examples() {
        assert!(radical_inverse(2, 0).unwrap().is_empty());
        let x = radical_inverse(2, 6).unwrap();
        assert_eq!(x.digits(), &[0, 1, 1]);
        assert_eq!(x.to_exact().unwrap(), frac(3, 8));
        let y = radical_inverse(3, 5).unwrap();
        assert_eq!(y.digits(), &[2, 1]);
        assert_eq!(y.to_exact().unwrap(), frac(7, 9));
        assert_eq!(radical_inverse(4, 1), Err(Error::InvalidBase(4)));
    }

    #[test]
    fn monna_inverse_examples() {
        assert_eq!(monna_inverse(&PAdicDigits::zero(2).unwrap()).unwrap(), 0);
        assert_eq!(monna_inverse(&d(2, &[0, 1, 1])).unwrap(), 6);
        assert_eq!(monna_inverse(&d(3, &[2, 1])).unwrap(), 5);
        let huge = PAdicDigits::new(2, vec![1; 70]).unwrap();
        assert_eq!(monna_inverse(&huge), Err(Error::Overflow("monna inverse")));
    }

    #[test]
    fn shift_examples() {
        let x = d(2, &[1, 0, 1]);
        assert_eq!(padic_shift(&x, &PAdicDigits::zero(2).unwrap()).unwrap(), x);
        let half = d(2, &[1]);
        assert_eq!(padic_shift(&half, &half).unwrap(), d(2, &[0, 1]));
        let two_thirds = d(3, &[2]);
        let s = padic_shift(&two_thirds, &two_thirds).unwrap();
        assert_eq!(s.to_exact().unwrap(), frac(4, 9));
        assert!(matches!(
            padic_shift(&half, &two_thirds),
            Err(Error::BaseMismatch { .. })
        ));
    }

    #[test]
    fn simplified_examples() {
        let half = d(2, &[1]);
        assert!(simplified_shift(&half, &half, 1).unwrap().is_empty());
        let x = d(5, &[4, 3]);
        assert_eq!(
            simplified_shift(&x, &PAdicDigits::zero(5).unwrap(), 2).unwrap(),
            x
        );
        let two_thirds = d(3, &[2]);
        let s = simplified_shift(&two_thirds, &two_thirds, 1).unwrap();
        assert_eq!(s.to_exact().unwrap(), frac(1, 3));
    }

    #[test]
    fn mid_simplified_examples() {
        let half = d(2, &[1]);
        assert_eq!(mid_simplified_shift(&half, &half, 1).unwrap(), frac(1, 4));
        let zero = PAdicDigits::zero(2).unwrap();
        assert_eq!(mid_simplified_shift(&zero, &zero, 2).unwrap(), frac(1, 8));
        let two_thirds = d(3, &[2]);
        assert_eq!(
            mid_simplified_shift(&two_thirds, &two_thirds, 1).unwrap(),
            frac(1, 2)
        );
    }

    #[test]
    fn numerator_round_trip() {
        for a in 0..27 {
            let x = PAdicDigits::from_numerator(3, a, 3).unwrap();
            assert_eq!(x.numerator(3).unwrap(), a);
            assert_eq!(x.to_f64(), a as f64 / 27.0);
        }
        assert!(PAdicDigits::from_numerator(3, 27, 3).is_err());
    }

    #[test]
    fn canonical_form_strips_trailing_zeros() {
        assert_eq!(d(3, &[1, 0, 0]), d(3, &[1]));
        assert!(PAdicDigits::new(3, vec![3]).is_err());
        assert!(PAdicDigits::new(6, vec![1]).is_err());
    }

    fn digits_strategy(p: u32) -> impl Strategy<Value = PAdicDigits> {
        proptest::collection::vec(0..p, 0..12).prop_map(move |v| PAdicDigits::new(p, v).unwrap())
    }

    proptest! {
        #[test]
        fn simplified_shift_permutes_grid(sigma in digits_strategy(3), m in 1u32..5) {
            let size = 3u64.pow(m);
            let mut seen = vec![false; size as usize];
            for a in 0..size {
                let x = PAdicDigits::from_numerator(3, a, m).unwrap();
                let t = simplified_shift(&x, &sigma, m).unwrap().numerator(m).unwrap();
                prop_assert!(!seen[t as usize]);
                seen[t as usize] = true;
            }
        }

        #[test]
        fn mid_simplified_inside_open_unit_interval(
            x in digits_strategy(5), sigma in digits_strategy(5), m in 1u32..6
        ) {
            let y = mid_simplified_shift(&x, &sigma, m).unwrap();
            let lo = ExactPoint::new(1, 2 * 5u64.pow(m)).unwrap();
            let hi = ExactPoint::new(2 * 5u64.pow(m) - 1, 2 * 5u64.pow(m)).unwrap();
            prop_assert!(lo <= y && y <= hi);
        }

        #[test]
        fn simplified_is_sum_mod_pm(a in 0u64..1000, b in 0u64..1000, m in 1u32..8) {
            let x = radical_inverse(2, a).unwrap();
            let s = radical_inverse(2, b).unwrap();
            let t = simplified_shift(&x, &s, m).unwrap();
            prop_assert_eq!(monna_inverse(&t).unwrap(), (a + b) % 2u64.pow(m));
        }
    }
}
