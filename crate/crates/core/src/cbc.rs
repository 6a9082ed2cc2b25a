//! Greedy component-by-component search for mid-simplified shifts.
//!
//! Dimension `d` picks `sigma_d = a_d / p_d^{m_d}` from the grid
//! `Q(p_d^{m_d})` minimising the squared worst-case error of the first `d`
//! shifted coordinates, with earlier components held fixed. Ties go to the
//! smallest numerator.

use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::bounds::cbc_bound_sq;
use crate::halton::{radical_inverse_column, shift_column, BaseVector, ShiftMode};
use crate::padic::{checked_pow, PAdicDigits};
use crate::wce::{squared_wce_columns, ErrorCache, WeightSequence, DEFAULT_MAX_POINTS};
use crate::{Error, Result};

/// Default cap on `p_d^{m_d}`, the candidate count of one dimension.
pub const DEFAULT_MAX_CANDIDATES: u64 = 1 << 20;

/// Smallest `m >= 1` with `N < p^m`.
pub fn minimal_m(p: u32, n: u64) -> Result<u32> {
    if p < 2 {
        return Err(Error::InvalidBase(p as u64));
    }
    let mut m = 1u32;
    let mut size = p as u64;
    while size <= n {
        size = size.checked_mul(p as u64).ok_or(Error::Overflow("p^m"))?;
        m += 1;
    }
    // mid-simplified coordinates live on the grid of 2 p^m
    size.checked_mul(2).ok_or(Error::Overflow("2 p^m"))?;
    Ok(m)
}

/// Per-dimension shifts `sigma_j = a_j / p_j^{m_j}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftVector {
    bases: BaseVector,
    ms: Vec<u32>,
    numerators: Vec<u64>,
}

impl ShiftVector {
    pub fn new(bases: BaseVector, ms: Vec<u32>, numerators: Vec<u64>) -> Result<Self> {
        for len in [ms.len(), numerators.len()] {
            if len != bases.dim() {
                return Err(Error::DimensionMismatch {
                    expected: bases.dim(),
                    found: len,
                });
            }
        }
        for ((&p, &m), &a) in bases.primes().iter().zip(&ms).zip(&numerators) {
            if m == 0 {
                return Err(Error::InvalidArgument("m must be positive".into()));
            }
            if a >= checked_pow(p, m)? {
                return Err(Error::OutOfRange(format!("numerator {a} not below {p}^{m}")));
            }
        }
        Ok(ShiftVector {
            bases,
            ms,
            numerators,
        })
    }

    /// The zero shift with minimal `m_j` for `N` points.
    pub fn zero(bases: &BaseVector, n: usize) -> Result<Self> {
        let ms = minimal_ms(bases, n)?;
        ShiftVector::new(bases.clone(), ms, vec![0; bases.dim()])
    }

    pub fn bases(&self) -> &BaseVector {
        &self.bases
    }

    pub fn ms(&self) -> &[u32] {
        &self.ms
    }

    pub fn numerators(&self) -> &[u64] {
        &self.numerators
    }

    pub fn dim(&self) -> usize {
        self.numerators.len()
    }

    pub fn sigma(&self, j: usize) -> Result<PAdicDigits> {
        PAdicDigits::from_numerator(self.bases.primes()[j], self.numerators[j], self.ms[j])
    }

    /// `sigma_j` as the string `a/p^m`, unreduced.
    pub fn fraction(&self, j: usize) -> String {
        let denom = (self.bases.primes()[j] as u64).pow(self.ms[j]);
        format!("{}/{}", self.numerators[j], denom)
    }

    /// The leading `d` components.
    pub fn prefix(&self, d: usize) -> Result<ShiftVector> {
        Ok(ShiftVector {
            bases: self.bases.prefix(d)?,
            ms: self.ms[..d].to_vec(),
            numerators: self.numerators[..d].to_vec(),
        })
    }
}

impl fmt::Display for ShiftVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = (0..self.dim()).map(|j| self.fraction(j)).collect();
        write!(f, "({})", parts.join(", "))
    }
}

pub fn minimal_ms(bases: &BaseVector, n: usize) -> Result<Vec<u32>> {
    bases.primes().iter().map(|&p| minimal_m(p, n as u64)).collect()
}

#[derive(Debug, Clone)]
pub struct CbcOptions {
    pub max_points: usize,
    pub max_candidates: u64,
    /// Replaces the minimal `m_j`. Bounds are not reported when set.
    pub m_override: Option<Vec<u32>>,
    /// Evaluates every candidate with the direct `O(d N^2)` formula instead
    /// of the cache. Cross-checking only.
    pub naive: bool,
}

impl Default for CbcOptions {
    fn default() -> Self {
        CbcOptions {
            max_points: DEFAULT_MAX_POINTS,
            max_candidates: DEFAULT_MAX_CANDIDATES,
            m_override: None,
            naive: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CbcResult {
    pub n: usize,
    pub shift: ShiftVector,
    /// `e^2_{N,d}(sigma_1, ..., sigma_d)` for `d = 1..=s`, re-evaluated directly.
    pub squared_errors: Vec<f64>,
    /// CBC bound at each `d`; `None` for `N < 2` or overridden `m`.
    pub bounds: Vec<Option<f64>>,
    pub candidate_counts: Vec<u64>,
    pub elapsed: Vec<Duration>,
}

impl CbcResult {
    pub fn dim(&self) -> usize {
        self.shift.dim()
    }

    /// Whether every error is within its bound (vacuously true where no
    /// bound applies).
    pub fn within_bounds(&self) -> bool {
        self.squared_errors
            .iter()
            .zip(&self.bounds)
            .all(|(e, b)| b.map_or(true, |b| *e <= b))
    }
}

/// Lexicographic `(error, index)` minimum; comparison is exact.
fn argmin(errors: &[f64]) -> (usize, f64) {
    let mut best = (0, errors[0]);
    for (a, &e) in errors.iter().enumerate().skip(1) {
        if e < best.1 {
            best = (a, e);
        }
    }
    best
}

fn candidate_column(h: &[PAdicDigits], p: u32, m: u32, a: u64) -> Result<Vec<f64>> {
    let sigma = PAdicDigits::from_numerator(p, a, m)?;
    Ok(shift_column(h, &sigma, m, ShiftMode::MidSimplified)?
        .iter()
        .map(|x| x.to_f64())
        .collect())
}

/// Errors of every candidate in `Q(p^m)` for the next dimension.
fn scan(
    cache: &ErrorCache,
    fixed: &[Vec<f64>],
    gammas: &[f64],
    h: &[PAdicDigits],
    p: u32,
    m: u32,
    naive: bool,
) -> Result<Vec<f64>> {
    let size = checked_pow(p, m)?;
    let gamma = gammas[fixed.len()];
    (0..size)
        .into_par_iter()
        .map(|a| {
            let column = candidate_column(h, p, m, a)?;
            if naive {
                let mut cols = fixed.to_vec();
                cols.push(column);
                squared_wce_columns(&cols, &gammas[..cols.len()])
            } else {
                cache.squared_wce_with(&column, gamma)
            }
        })
        .collect()
}

fn resolve_ms(bases: &BaseVector, n: usize, options: &CbcOptions) -> Result<Vec<u32>> {
    let ms = match &options.m_override {
        Some(ms) => {
            if ms.len() != bases.dim() {
                return Err(Error::DimensionMismatch {
                    expected: bases.dim(),
                    found: ms.len(),
                });
            }
            ms.clone()
        }
        None => minimal_ms(bases, n)?,
    };
    for (&p, &m) in bases.primes().iter().zip(&ms) {
        let size = checked_pow(p, m)?;
        if size > options.max_candidates {
            return Err(Error::CapExceeded {
                what: "p^m",
                value: size as u128,
                cap: options.max_candidates as u128,
            });
        }
        checked_pow(p, m)?
            .checked_mul(2)
            .ok_or(Error::Overflow("2 p^m"))?;
    }
    Ok(ms)
}

pub fn cbc_construct(
    bases: &BaseVector,
    n: usize,
    weights: &WeightSequence,
) -> Result<CbcResult> {
    cbc_construct_with(bases, n, weights, &CbcOptions::default())
}

pub fn cbc_construct_with(
    bases: &BaseVector,
    n: usize,
    weights: &WeightSequence,
    options: &CbcOptions,
) -> Result<CbcResult> {
    let s = bases.dim();
    let weights = weights.prefix(s)?;
    let gammas = weights.gammas();
    let ms = resolve_ms(bases, n, options)?;
    let mut cache = ErrorCache::with_cap(n, options.max_points)?;
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut numerators = Vec::with_capacity(s);
    let mut squared_errors = Vec::with_capacity(s);
    let mut bounds = Vec::with_capacity(s);
    let mut candidate_counts = Vec::with_capacity(s);
    let mut elapsed = Vec::with_capacity(s);

    for (d, (&p, &m)) in bases.primes().iter().zip(&ms).enumerate() {
        let start = Instant::now();
        let h = radical_inverse_column(p, n)?;
        let errors = scan(&cache, &columns, gammas, &h, p, m, options.naive)?;
        let (best, _) = argmin(&errors);
        let column = candidate_column(&h, p, m, best as u64)?;
        cache = cache.extend(&column, gammas[d])?;
        columns.push(column);
        numerators.push(best as u64);
        squared_errors.push(squared_wce_columns(&columns, &gammas[..=d])?);
        bounds.push(if n >= 2 && options.m_override.is_none() {
            Some(cbc_bound_sq(bases, &weights, n, d + 1)?)
        } else {
            None
        });
        candidate_counts.push(errors.len() as u64);
        elapsed.push(start.elapsed());
    }

    Ok(CbcResult {
        n,
        shift: ShiftVector::new(bases.clone(), ms, numerators)?,
        squared_errors,
        bounds,
        candidate_counts,
        elapsed,
    })
}

/// Repeats the search of dimension `d` (1-based) with the constructed
/// components `1..d` fixed and returns the winning numerator.
pub fn rescan_dimension(
    result: &CbcResult,
    d: usize,
    weights: &WeightSequence,
    n: usize,
) -> Result<u64> {
    if d == 0 || d > result.dim() {
        return Err(Error::OutOfRange(format!(
            "dimension {d} not in 1..={}",
            result.dim()
        )));
    }
    let shift = &result.shift;
    let gammas = weights.prefix(result.dim())?;
    let gammas = gammas.gammas();
    let mut cache = ErrorCache::new(n)?;
    let mut fixed = Vec::new();
    for j in 0..d - 1 {
        let p = shift.bases().primes()[j];
        let h = radical_inverse_column(p, n)?;
        let column = candidate_column(&h, p, shift.ms()[j], shift.numerators()[j])?;
        cache = cache.extend(&column, gammas[j])?;
        fixed.push(column);
    }
    let p = shift.bases().primes()[d - 1];
    let h = radical_inverse_column(p, n)?;
    let errors = scan(&cache, &fixed, gammas, &h, p, shift.ms()[d - 1], false)?;
    Ok(argmin(&errors).0 as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::halton::shifted_halton_points;
    use crate::wce::squared_wce;

    fn bases(v: &[u32]) -> BaseVector {
        BaseVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn minimal_m_examples() {
        assert_eq!(minimal_m(2, 8).unwrap(), 4);
        assert_eq!(minimal_m(3, 8).unwrap(), 2);
        assert_eq!(minimal_m(2, 1).unwrap(), 1);
        assert_eq!(minimal_m(5, 0).unwrap(), 1);
        assert_eq!(minimal_m(2, u64::MAX), Err(Error::Overflow("p^m")));
    }

    #[test]
    fn shift_vector_validation() {
        let b = bases(&[2, 3]);
        assert!(ShiftVector::new(b.clone(), vec![2, 2], vec![3, 8]).is_ok());
        assert!(ShiftVector::new(b.clone(), vec![2, 2], vec![4, 0]).is_err());
        assert!(ShiftVector::new(b.clone(), vec![2], vec![0, 0]).is_err());
        let s = ShiftVector::new(b, vec![2, 2], vec![3, 8]).unwrap();
        assert_eq!(s.to_string(), "(3/4, 8/9)");
    }

    #[test]
    fn argmin_breaks_ties_low() {
        assert_eq!(argmin(&[2.0, 1.0, 1.0, 3.0]), (1, 1.0));
        assert_eq!(argmin(&[0.5, 0.5]), (0, 0.5));
    }

    #[test]
    fn single_base_matches_brute_force() {
        let w = WeightSequence::new(vec![1.0]).unwrap();
        let b = bases(&[2]);
        let r = cbc_construct(&b, 4, &w).unwrap();
        assert_eq!(r.shift.ms(), &[3]);
        let mut best = (0u64, f64::INFINITY);
        for a in 0..8 {
            let shift = ShiftVector::new(b.clone(), vec![3], vec![a]).unwrap();
            let pts = shifted_halton_points(&b, 4, &shift, ShiftMode::MidSimplified).unwrap();
            let e = squared_wce(&pts, &w).unwrap();
            if e < best.1 {
                best = (a, e);
            }
        }
        assert_eq!(r.shift.numerators()[0], best.0);
        assert_eq!(r.squared_errors[0], best.1);
    }

    #[test]
    fn two_dims_within_bound_and_rescan() {
        let w = WeightSequence::new(vec![1.0, 0.5]).unwrap();
        let b = bases(&[2, 3]);
        let r = cbc_construct(&b, 4, &w).unwrap();
        assert!(r.within_bounds());
        for d in 1..=2 {
            assert_eq!(rescan_dimension(&r, d, &w, 4).unwrap(), r.shift.numerators()[d - 1]);
        }
        assert!(rescan_dimension(&r, 3, &w, 4).is_err());
        assert!(rescan_dimension(&r, 0, &w, 4).is_err());
    }

    #[test]
    fn single_point_picks_smallest_tied_numerator() {
        let w = WeightSequence::new(vec![1.0]).unwrap();
        let r = cbc_construct(&bases(&[2]), 1, &w).unwrap();
        // {1/4} and {3/4} tie at 7/48
        assert_eq!(r.shift.numerators(), &[0]);
        assert!((r.squared_errors[0] - 7.0 / 48.0).abs() < 1e-15);
        assert_eq!(r.bounds, vec![None]);
        assert_eq!(rescan_dimension(&r, 1, &w, 1).unwrap(), 0);
    }

    #[test]
    fn naive_and_cached_agree() {
        let w = WeightSequence::new(vec![1.0, 0.25, 1.0 / 9.0]).unwrap();
        let b = bases(&[2, 3, 5]);
        let cached = cbc_construct(&b, 12, &w).unwrap();
        let naive = cbc_construct_with(
            &b,
            12,
            &w,
            &CbcOptions {
                naive: true,
                ..CbcOptions::default()
            },
        )
        .unwrap();
        assert_eq!(cached.shift, naive.shift);
        assert_eq!(cached.squared_errors, naive.squared_errors);
    }

    #[test]
    fn caps_and_overrides() {
        let w = WeightSequence::new(vec![1.0]).unwrap();
        let b = bases(&[2]);
        let opts = CbcOptions {
            max_points: 8,
            ..CbcOptions::default()
        };
        assert!(matches!(
            cbc_construct_with(&b, 9, &w, &opts),
            Err(Error::CapExceeded { .. })
        ));
        let opts = CbcOptions {
            m_override: Some(vec![5]),
            ..CbcOptions::default()
        };
        let r = cbc_construct_with(&b, 4, &w, &opts).unwrap();
        assert_eq!(r.candidate_counts, vec![32]);
        assert_eq!(r.bounds, vec![None]);
    }
}
