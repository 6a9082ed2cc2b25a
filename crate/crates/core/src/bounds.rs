//! Upper bounds on the squared worst-case error of shifted Halton point sets.
//!
//! Both bounds use natural logarithms for `log N` and `log p_j`.

use serde::Serialize;

use crate::halton::BaseVector;
use crate::wce::WeightSequence;
use crate::{Error, Result};

fn check(bases: &BaseVector, weights: &WeightSequence, n: usize, d: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("bounds need N >= 2, got {n}")));
    }
    if d > bases.dim() || d > weights.len() {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bases.dim().min(weights.len()),
        });
    }
    Ok(())
}

/// `(1/N^2) [prod (1 + c gamma_j log N p_j^2 / log p_j) + prod (1 + gamma_j / r) prod (1 + gamma_j p_j / 6)]`
fn evaluate(
    bases: &BaseVector,
    weights: &WeightSequence,
    n: usize,
    d: usize,
    log_factor: f64,
    middle_divisor: f64,
) -> f64 {
    let log_n = (n as f64).ln();
    let mut first = 1.0;
    let mut middle = 1.0;
    let mut last = 1.0;
    for (&p, &g) in bases.primes().iter().zip(weights.gammas()).take(d) {
        let p = p as f64;
        first *= 1.0 + log_factor * g * log_n * p * p / p.ln();
        middle *= 1.0 + g / middle_divisor;
        last *= 1.0 + g * p / 6.0;
    }
    let n = n as f64;
    (first + middle * last) / (n * n)
}

/// Bound on the mean squared error over uniformly random p-adic shifts.
pub fn rms_bound_sq(
    bases: &BaseVector,
    weights: &WeightSequence,
    n: usize,
    d: usize,
) -> Result<f64> {
    check(bases, weights, n, d)?;
    Ok(evaluate(bases, weights, n, d, 1.0, 2.0))
}

/// Bound on the squared error after `d` steps of the CBC search.
pub fn cbc_bound_sq(
    bases: &BaseVector,
    weights: &WeightSequence,
    n: usize,
    d: usize,
) -> Result<f64> {
    check(bases, weights, n, d)?;
    Ok(evaluate(bases, weights, n, d, 2.0, 1.0))
}

/// `sum_j gamma_j p_j^2 / log p_j` over the materialised weights; finiteness
/// of the infinite sum drives the dimension-independent rate.
pub fn summability_indicator(bases: &BaseVector, weights: &WeightSequence) -> f64 {
    bases
        .primes()
        .iter()
        .zip(weights.gammas())
        .map(|(&p, &g)| {
            let p = p as f64;
            g * p * p / p.ln()
        })
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub d: usize,
    pub bases: Vec<u32>,
    pub weights: Vec<f64>,
    pub rms_bound_sq: f64,
    pub cbc_bound_sq: f64,
    pub summability: f64,
}

pub fn bound_report(
    bases: &BaseVector,
    weights: &WeightSequence,
    n: usize,
    d: usize,
) -> Result<BoundReport> {
    let b = bases.prefix(d)?;
    let w = weights.prefix(d)?;
    Ok(BoundReport {
        n,
        d,
        bases: b.primes().to_vec(),
        weights: w.gammas().to_vec(),
        rms_bound_sq: rms_bound_sq(bases, weights, n, d)?,
        cbc_bound_sq: cbc_bound_sq(bases, weights, n, d)?,
        summability: summability_indicator(&b, &w),
    })
}
