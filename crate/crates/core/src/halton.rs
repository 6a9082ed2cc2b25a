//! Plain and shifted Halton point sets with exact coordinates.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cbc::{minimal_m, ShiftVector};
use crate::padic::{
    check_prime, checked_pow, is_prime, mid_simplified_shift, padic_shift, radical_inverse,
    simplified_shift, PAdicDigits,
};
use crate::rational::ExactPoint;
use crate::{Error, Result};

/// Pairwise distinct prime bases `(p_1, ..., p_s)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct BaseVector(Vec<u32>);

impl BaseVector {
    pub fn new(primes: Vec<u32>) -> Result<Self> {
        if primes.is_empty() {
            return Err(Error::InvalidArgument("at least one base required".into()));
        }
        let mut seen = HashSet::new();
        for &p in &primes {
            check_prime(p as u64)?;
            if !seen.insert(p) {
                return Err(Error::DuplicateBase(p));
            }
        }
        Ok(BaseVector(primes))
    }

    /// The first `s` primes `2, 3, 5, ...`.
    pub fn first_primes(s: usize) -> Result<Self> {
        let primes = (2u32..).filter(|&n| is_prime(n as u64)).take(s).collect();
        Self::new(primes)
    }

    pub fn primes(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Leading `d` bases.
    pub fn prefix(&self, d: usize) -> Result<Self> {
        if d == 0 || d > self.dim() {
            return Err(Error::OutOfRange(format!("prefix length {d}")));
        }
        Ok(BaseVector(self.0[..d].to_vec()))
    }
}

impl TryFrom<Vec<u32>> for BaseVector {
    type Error = Error;

    fn try_from(v: Vec<u32>) -> Result<Self> {
        BaseVector::new(v)
    }
}

impl From<BaseVector> for Vec<u32> {
    fn from(b: BaseVector) -> Self {
        b.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftMode {
    Full,
    Simplified,
    MidSimplified,
}

impl std::str::FromStr for ShiftMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ShiftMode::Full),
            "simplified" | "simp" => Ok(ShiftMode::Simplified),
            "mid-simplified" | "mid" | "simi" => Ok(ShiftMode::MidSimplified),
            _ => Err(Error::InvalidArgument(format!("unknown shift mode {s:?}"))),
        }
    }
}

/// `N` points in `[0,1)^s`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<ExactPoint>,
}

impl PointSet {
    pub fn from_columns(columns: &[Vec<ExactPoint>]) -> Result<Self> {
        let dim = columns.len();
        let count = columns.first().map_or(0, Vec::len);
        if count == 0 {
            return Err(Error::EmptyPointSet);
        }
        if let Some(c) = columns.iter().find(|c| c.len() != count) {
            return Err(Error::LengthMismatch {
                expected: count,
                found: c.len(),
            });
        }
        let coords = (0..count)
            .flat_map(|n| columns.iter().map(move |c| c[n]))
            .collect();
        Ok(PointSet { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, n: usize) -> &[ExactPoint] {
        &self.coords[n * self.dim..(n + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<ExactPoint> {
        (0..self.len()).map(|n| self.point(n)[j]).collect()
    }

    /// Column-major double-precision view used by error evaluation.
    pub fn columns_f64(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|j| (0..self.len()).map(|n| self.point(n)[j].to_f64()).collect())
            .collect()
    }

    /// CSV with header `n,x1,...,xs`; coordinates as `a/b` when `exact`,
    /// otherwise as shortest round-trip decimals.
    pub fn to_csv(&self, exact: bool) -> String {
        let mut out = String::from("n");
        for j in 1..=self.dim {
            let _ = write!(out, ",x{j}");
        }
        out.push('\n');
        for n in 0..self.len() {
            let _ = write!(out, "{n}");
            for x in self.point(n) {
                if exact {
                    let _ = write!(out, ",{x}");
                } else {
                    let _ = write!(out, ",{}", x.to_f64());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Radical inverses `phi_p(0), ..., phi_p(N-1)` as digit vectors.
pub fn radical_inverse_column(p: u32, n_points: usize) -> Result<Vec<PAdicDigits>> {
    (0..n_points as u64).map(|n| radical_inverse(p, n)).collect()
}

/// Applies one shift operator to every entry of a column.
pub fn shift_column(
    column: &[PAdicDigits],
    sigma: &PAdicDigits,
    m: u32,
    mode: ShiftMode,
) -> Result<Vec<ExactPoint>> {
    column
        .iter()
        .map(|x| match mode {
            ShiftMode::Full => padic_shift(x, sigma)?.to_exact(),
            ShiftMode::Simplified => simplified_shift(x, sigma, m)?.to_exact(),
            ShiftMode::MidSimplified => mid_simplified_shift(x, sigma, m),
        })
        .collect()
}

fn check_size(bases: &BaseVector, n_points: usize) -> Result<()> {
    if n_points == 0 {
        return Err(Error::EmptyPointSet);
    }
    for &p in bases.primes() {
        minimal_m(p, n_points as u64)?;
    }
    Ok(())
}

/// The first `N` points of the Halton sequence in the given bases.
pub fn halton_points(bases: &BaseVector, n_points: usize) -> Result<PointSet> {
    check_size(bases, n_points)?;
    let columns = bases
        .primes()
        .iter()
        .map(|&p| {
            radical_inverse_column(p, n_points)?
                .iter()
                .map(PAdicDigits::to_exact)
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    PointSet::from_columns(&columns)
}

/// The first `N` Halton points with `shift` applied coordinate-wise.
pub fn shifted_halton_points(
    bases: &BaseVector,
    n_points: usize,
    shift: &ShiftVector,
    mode: ShiftMode,
) -> Result<PointSet> {
    if shift.bases() != bases {
        return Err(Error::DimensionMismatch {
            expected: bases.dim(),
            found: shift.dim(),
        });
    }
    check_size(bases, n_points)?;
    let columns = (0..bases.dim())
        .map(|j| {
            let p = bases.primes()[j];
            let m = shift.ms()[j];
            if mode == ShiftMode::Full {
                checked_pow(p, m + 1)?;
            }
            let sigma = shift.sigma(j)?;
            shift_column(&radical_inverse_column(p, n_points)?, &sigma, m, mode)
        })
        .collect::<Result<Vec<_>>>()?;
    PointSet::from_columns(&columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frac(a: u64, b: u64) -> ExactPoint {
        ExactPoint::new(a, b).unwrap()
    }

    #[test]
    fn van_der_corput_base_two() {
        let pts = halton_points(&BaseVector::new(vec![2]).unwrap(), 4).unwrap();
        assert_eq!(
            pts.column(0),
            vec![frac(0, 1), frac(1, 2), frac(1, 4), frac(3, 4)]
        );
    }

    #[test]
    fn single_point_is_origin() {
        let pts = halton_points(&BaseVector::new(vec![2, 3]).unwrap(), 1).unwrap();
        assert_eq!(pts.point(0), &[ExactPoint::ZERO, ExactPoint::ZERO]);
    }

    #[test]
    fn full_cycle_is_grid() {
        let pts = halton_points(&BaseVector::new(vec![3]).unwrap(), 9).unwrap();
        let mut col = pts.column(0);
        col.sort();
        let grid: Vec<_> = (0..9).map(|a| frac(a, 9)).collect();
        assert_eq!(col, grid);
        for n in 0..3 {
            assert_eq!(pts.point(n)[0], frac(n as u64, 3));
        }
    }

    #[test]
    fn bases_validation() {
        assert_eq!(BaseVector::new(vec![2, 2]), Err(Error::DuplicateBase(2)));
        assert_eq!(BaseVector::new(vec![2, 9]), Err(Error::InvalidBase(9)));
        assert_eq!(BaseVector::first_primes(5).unwrap().primes(), &[2, 3, 5, 7, 11]);
    }

    #[test]
    fn zero_full_shift_is_identity() {
        let bases = BaseVector::new(vec![2, 3, 5]).unwrap();
        let shift = ShiftVector::zero(&bases, 10).unwrap();
        let a = halton_points(&bases, 10).unwrap();
        let b = shifted_halton_points(&bases, 10, &shift, ShiftMode::Full).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quarter_shift_examples() {
        let bases = BaseVector::new(vec![2]).unwrap();
        let shift = ShiftVector::new(bases.clone(), vec![2], vec![1]).unwrap();
        let simp = shifted_halton_points(&bases, 2, &shift, ShiftMode::Simplified).unwrap();
        assert_eq!(simp.column(0), vec![frac(1, 4), frac(3, 4)]);
        let mid = shifted_halton_points(&bases, 2, &shift, ShiftMode::MidSimplified).unwrap();
        assert_eq!(mid.column(0), vec![frac(3, 8), frac(7, 8)]);
    }

    #[test]
    fn simplified_shift_of_full_cycle_is_grid() {
        let bases = BaseVector::new(vec![5]).unwrap();
        for a in 0..25 {
            let shift = ShiftVector::new(bases.clone(), vec![2], vec![a]).unwrap();
            let pts = shifted_halton_points(&bases, 25, &shift, ShiftMode::Simplified).unwrap();
            let mut col = pts.column(0);
            col.sort();
            assert_eq!(col, (0..25).map(|k| frac(k, 25)).collect::<Vec<_>>());
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let bases = BaseVector::new(vec![2, 3]).unwrap();
        let other = BaseVector::new(vec![2]).unwrap();
        let shift = ShiftVector::zero(&other, 4).unwrap();
        assert!(matches!(
            shifted_halton_points(&bases, 4, &shift, ShiftMode::Full),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn csv_export() {
        let pts = halton_points(&BaseVector::new(vec![2, 3]).unwrap(), 3).unwrap();
        assert_eq!(pts.to_csv(true), "n,x1,x2\n0,0/1,0/1\n1,1/2,1/3\n2,1/4,2/3\n");
        assert!(pts.to_csv(false).starts_with("n,x1,x2\n0,0,0\n1,0.5,0.3333333333333333\n"));
    }
}
