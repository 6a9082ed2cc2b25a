//! Squared worst-case error in the weighted anchored Sobolev space with
//! kernel `K(x, y) = prod_j (1 + gamma_j min(1 - x_j, 1 - y_j))`.
//!
//! For `N` points the squared error has the closed form
//!
//! ```text
//! e^2 = prod_j (1 + gamma_j/3)
//!     - (2/N) sum_n prod_j (1 + gamma_j/2 (1 - x_{n,j}^2))
//!     + (1/N^2) sum_{n,h} prod_j (1 + gamma_j min(1 - x_{n,j}, 1 - x_{h,j}))
//! ```
//!
//! Products are always accumulated in dimension order and sums use the fixed
//! tree of [`pairwise_sum`], so the direct and cached evaluations agree bit
//! for bit and neither depends on the worker count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::halton::PointSet;
use crate::sum::pairwise_sum;
use crate::{Error, Result};

/// Largest point count accepted by default; the pair cache holds `N^2` doubles.
pub const DEFAULT_MAX_POINTS: usize = 4096;

/// How a weight sequence is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WeightSpec {
    /// Explicit `gamma_1, ..., gamma_s`.
    List(Vec<f64>),
    /// `gamma_j = c * j^-a`.
    Power { c: f64, a: f64 },
    /// `gamma_j = r^j`.
    Geometric { r: f64 },
}

impl WeightSpec {
    pub fn materialize(&self, s: usize) -> Result<WeightSequence> {
        let gammas = match self {
            WeightSpec::List(v) => {
                if v.len() < s {
                    return Err(Error::InvalidWeights(format!(
                        "{} weights given for dimension {s}",
                        v.len()
                    )));
                }
                v[..s].to_vec()
            }
            WeightSpec::Power { c, a } => {
                if !(*a >= 0.0) {
                    return Err(Error::InvalidWeights(format!("exponent {a} is negative")));
                }
                (1..=s).map(|j| c * (j as f64).powf(-a)).collect()
            }
            WeightSpec::Geometric { r } => (1..=s).map(|j| r.powi(j as i32)).collect(),
        };
        WeightSequence::new(gammas)
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidWeights(format!("cannot parse weights {s:?}"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(base) = t.strip_suffix("^j") {
            return Ok(WeightSpec::Geometric { r: num(base)? });
        }
        if let Some((c, a)) = t.split_once("/j^") {
            return Ok(WeightSpec::Power { c: num(c)?, a: num(a)? });
        }
        if let Some(c) = t.strip_suffix("/j") {
            return Ok(WeightSpec::Power { c: num(c)?, a: 1.0 });
        }
        let list = t.split(',').map(num).collect::<Result<Vec<_>>>()?;
        Ok(WeightSpec::List(list))
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::List(v) => {
                let parts: Vec<String> = v.iter().map(f64::to_string).collect();
                write!(f, "{}", parts.join(","))
            }
            WeightSpec::Power { c, a } => write!(f, "{c}/j^{a}"),
            WeightSpec::Geometric { r } => write!(f, "{r}^j"),
        }
    }
}

impl TryFrom<String> for WeightSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<WeightSpec> for String {
    fn from(w: WeightSpec) -> Self {
        w.to_string()
    }
}

/// Non-increasing positive weights with `gamma_1 <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    gammas: Vec<f64>,
}

impl WeightSequence {
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::InvalidWeights("empty weight list".into()));
        }
        if !(gammas[0] <= 1.0) {
            return Err(Error::InvalidWeights(format!("gamma_1 = {} > 1", gammas[0])));
        }
        for (j, w) in gammas.windows(2).enumerate() {
            if !(w[1] <= w[0]) {
                return Err(Error::InvalidWeights(format!(
                    "weights increase at j = {}",
                    j + 2
                )));
            }
        }
        if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidWeights(format!("non-positive weight {g}")));
        }
        Ok(WeightSequence { gammas })
    }

    /// Skips validation; zero weights are allowed. Test hook only.
    #[doc(hidden)]
    pub fn unchecked(gammas: Vec<f64>) -> Self {
        WeightSequence { gammas }
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn prefix(&self, d: usize) -> Result<WeightSequence> {
        if d > self.len() {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.len(),
            });
        }
        Ok(WeightSequence {
            gammas: self.gammas[..d].to_vec(),
        })
    }
}

#[inline]
fn pair_factor(gamma: f64, x: f64, y: f64) -> f64 {
    1.0 + gamma * (1.0 - x).min(1.0 - y)
}

#[inline]
fn linear_factor(gamma: f64, x: f64) -> f64 {
    1.0 + gamma / 2.0 * (1.0 - x * x)
}

#[inline]
fn combine(scalar: f64, linear_sum: f64, pair_sum: f64, n: usize) -> f64 {
    let n = n as f64;
    scalar - 2.0 / n * linear_sum + pair_sum / (n * n)
}

/// The reproducing kernel of the space.
pub fn kernel(x: &[f64], y: &[f64], gammas: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(gammas)
        .fold(1.0, |acc, ((&a, &b), &g)| acc * pair_factor(g, a, b))
}

/// Squared worst-case error of a point set.
pub fn squared_wce(points: &PointSet, weights: &WeightSequence) -> Result<f64> {
    squared_wce_columns(&points.columns_f64(), weights.gammas())
}

/// Squared worst-case error from column-major double coordinates.
pub fn squared_wce_columns(columns: &[Vec<f64>], gammas: &[f64]) -> Result<f64> {
    if columns.len() != gammas.len() {
        return Err(Error::DimensionMismatch {
            expected: columns.len(),
            found: gammas.len(),
        });
    }
    let n = columns.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::EmptyPointSet);
    }
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            found: c.len(),
        });
    }
    let scalar = gammas.iter().fold(1.0, |acc, g| acc * (1.0 + g / 3.0));
    let linear: Vec<f64> = (0..n)
        .map(|i| {
            columns
                .iter()
                .zip(gammas)
                .fold(1.0, |acc, (c, &g)| acc * linear_factor(g, c[i]))
        })
        .collect();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = (0..n)
                .map(|k| {
                    columns
                        .iter()
                        .zip(gammas)
                        .fold(1.0, |acc, (c, &g)| acc * pair_factor(g, c[i], c[k]))
                })
                .collect();
            pairwise_sum(&row)
        })
        .collect();
    Ok(combine(scalar, pairwise_sum(&linear), pairwise_sum(&rows), n))
}

/// Products of the first `d` dimensions' kernel factors, so that appending a
/// candidate column costs `O(N^2)` regardless of `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCache {
    dim: usize,
    n: usize,
    pair: Vec<f64>,
    linear: Vec<f64>,
    scalar: f64,
}

impl ErrorCache {
    /// Empty (`d = 0`) cache for `N` points.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_cap(n, DEFAULT_MAX_POINTS)
    }

    pub fn with_cap(n: usize, max_points: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyPointSet);
        }
        if n > max_points {
            return Err(Error::CapExceeded {
                what: "N",
                value: n as u128,
                cap: max_points as u128,
            });
        }
        Ok(ErrorCache {
            dim: 0,
            n,
            pair: vec![1.0; n * n],
            linear: vec![1.0; n],
            scalar: 1.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn pair(&self, n: usize, k: usize) -> f64 {
        self.pair[n * self.n + k]
    }

    pub fn linear(&self, n: usize) -> f64 {
        self.linear[n]
    }

    pub fn scalar(&self) -> f64 {
        self.scalar
    }

    fn check_column(&self, column: &[f64]) -> Result<()> {
        if column.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: column.len(),
            });
        }
        Ok(())
    }

    /// A new cache one dimension larger.
    pub fn extend(&self, column: &[f64], gamma: f64) -> Result<ErrorCache> {
        self.check_column(column)?;
        let n = self.n;
        let mut pair = self.pair.clone();
        pair.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (k, a) in row.iter_mut().enumerate() {
                *a *= pair_factor(gamma, column[i], column[k]);
            }
        });
        let linear = self
            .linear
            .iter()
            .zip(column)
            .map(|(b, &y)| b * linear_factor(gamma, y))
            .collect();
        Ok(ErrorCache {
            dim: self.dim + 1,
            n,
            pair,
            linear,
            scalar: self.scalar * (1.0 + gamma / 3.0),
        })
    }

    /// Squared error of the cached `d`-dimensional point set.
    pub fn squared_wce(&self) -> f64 {
        let rows: Vec<f64> = self.pair.chunks(self.n).map(pairwise_sum).collect();
        combine(
            self.scalar,
            pairwise_sum(&self.linear),
            pairwise_sum(&rows),
            self.n,
        )
    }

    /// Squared error of the cached set with `column` appended as dimension
    /// `d + 1` under weight `gamma`. Leaves the cache untouched.
    pub fn squared_wce_with(&self, column: &[f64], gamma: f64) -> Result<f64> {
        self.check_column(column)?;
        let n = self.n;
        let linear: Vec<f64> = self
            .linear
            .iter()
            .zip(column)
            .map(|(b, &y)| b * linear_factor(gamma, y))
            .collect();
        let mut row = vec![0.0; n];
        let rows: Vec<f64> = self
            .pair
            .chunks(n)
            .enumerate()
            .map(|(i, a)| {
                for (k, r) in row.iter_mut().enumerate() {
                    *r = a[k] * pair_factor(gamma, column[i], column[k]);
                }
                pairwise_sum(&row)
            })
            .collect();
        Ok(combine(
            self.scalar * (1.0 + gamma / 3.0),
            pairwise_sum(&linear),
            pairwise_sum(&rows),
            n,
        ))
    }
}

/// Spelled-out operation names for the cache API.
pub fn cache_init(n: usize) -> Result<ErrorCache> {
    ErrorCache::new(n)
}

pub fn cache_extend(cache: &ErrorCache, column: &[f64], gamma: f64) -> Result<ErrorCache> {
    cache.extend(column, gamma)
}

pub fn squared_wce_from_cache(cache: &ErrorCache, column: &[f64], gamma: f64) -> Result<f64> {
    cache.squared_wce_with(column, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn hand_values() {
        let e = squared_wce_columns(&[vec![0.5]], &[1.0]).unwrap();
        assert!((e - 1.0 / 12.0).abs() < 1e-12);
        let e = squared_wce_columns(&[vec![0.0, 0.5]], &[1.0]).unwrap();
        assert!((e - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_give_zero() {
        let cols = vec![vec![0.1, 0.7, 0.3], vec![0.9, 0.2, 0.5]];
        assert_eq!(squared_wce_columns(&cols, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn anchor_point_single_dimension() {
        // a point at the anchor: min-term and (1 - x^2) term both vanish
        let g = 0.7;
        let e = squared_wce_columns(&[vec![1.0]], &[g]).unwrap();
        assert!((e - g / 3.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert_eq!(squared_wce_columns(&[vec![]], &[1.0]), Err(Error::EmptyPointSet));
        assert!(matches!(
            squared_wce_columns(&[vec![0.1]], &[1.0, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
        let cache = ErrorCache::new(3).unwrap();
        assert!(matches!(
            cache.extend(&[0.1, 0.2], 1.0),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            ErrorCache::new(DEFAULT_MAX_POINTS + 1),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn weight_validation() {
        assert!(WeightSequence::new(vec![1.0, 0.5, 0.5]).is_ok());
        assert!(WeightSequence::new(vec![1.5]).is_err());
        assert!(WeightSequence::new(vec![0.5, 0.6]).is_err());
        assert!(WeightSequence::new(vec![0.5, 0.0]).is_err());
        assert!(WeightSequence::new(vec![]).is_err());
    }

    #[test]
    fn weight_specs() {
        let w: WeightSpec = "1/j^2".parse().unwrap();
        assert_eq!(w, WeightSpec::Power { c: 1.0, a: 2.0 });
        assert_eq!(w.materialize(3).unwrap().gammas(), &[1.0, 0.25, 1.0 / 9.0]);
        let g: WeightSpec = "0.9^j".parse().unwrap();
        assert_eq!(g.materialize(2).unwrap().gammas(), &[0.9, 0.81]);
        let l: WeightSpec = "1, 0.5".parse().unwrap();
        assert_eq!(l, WeightSpec::List(vec![1.0, 0.5]));
        assert!(l.materialize(3).is_err());
        assert!("2/j^2".parse::<WeightSpec>().unwrap().materialize(1).is_err());
        assert!("abc".parse::<WeightSpec>().is_err());
        for spec in ["1/j^2", "0.5/j^3", "0.9^j", "1,0.5,0.25"] {
            let w: WeightSpec = spec.parse().unwrap();
            assert_eq!(w.to_string().parse::<WeightSpec>().unwrap(), w);
        }
    }

    #[test]
    fn fresh_cache_is_all_ones() {
        let c = ErrorCache::new(3).unwrap();
        assert_eq!(c.dim(), 0);
        assert_eq!(c.scalar(), 1.0);
        for n in 0..3 {
            assert_eq!(c.linear(n), 1.0);
            for k in 0..3 {
                assert_eq!(c.pair(n, k), 1.0);
            }
        }
    }

    #[test]
    fn anchor_column_only_scales_scalar() {
        let c = ErrorCache::new(4).unwrap();
        let e = c.extend(&[1.0; 4], 0.5).unwrap();
        assert_eq!(e.pair, c.pair);
        assert_eq!(e.linear, c.linear);
        assert_eq!(e.scalar(), 1.0 + 0.5 / 3.0);
    }

    #[test]
    fn cache_matches_direct_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let s = rng.gen_range(1..=4);
            let n = rng.gen_range(1..=32);
            let cols: Vec<Vec<f64>> = (0..s)
                .map(|_| (0..n).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let mut gammas: Vec<f64> = (0..s).map(|_| rng.gen_range(0.01..1.0)).collect();
            gammas.sort_by(|a, b| b.total_cmp(a));
            let direct = squared_wce_columns(&cols, &gammas).unwrap();
            let mut cache = ErrorCache::new(n).unwrap();
            for j in 0..s - 1 {
                cache = cache.extend(&cols[j], gammas[j]).unwrap();
            }
            let cached = cache.squared_wce_with(&cols[s - 1], gammas[s - 1]).unwrap();
            assert!(close(direct, cached, 1e-12), "{direct} vs {cached}");
            let full = cache.extend(&cols[s - 1], gammas[s - 1]).unwrap();
            assert!(close(direct, full.squared_wce(), 1e-12));
        }
    }

    proptest! {
        #[test]
        fn nonnegative(cols in proptest::collection::vec(
            proptest::collection::vec(0.0f64..1.0, 5), 1..4), g in 0.01f64..1.0) {
            let gammas = vec![g; cols.len()];
            prop_assert!(squared_wce_columns(&cols, &gammas).unwrap() >= -1e-12);
        }

        #[test]
        fn extended_pair_cache_is_symmetric(col in proptest::collection::vec(0.0f64..1.0, 1..10)) {
            let n = col.len();
            let c = ErrorCache::new(n).unwrap().extend(&col, 0.8).unwrap();
            for i in 0..n {
                prop_assert!(c.linear(i) >= 1.0);
                for k in 0..n {
                    prop_assert_eq!(c.pair(i, k), c.pair(k, i));
                    prop_assert!(c.pair(i, k) >= 1.0);
                }
            }
        }
    }
}
