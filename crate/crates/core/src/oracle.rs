//! Brute-force enumeration checks for finitely supported distributions.
//!
//! Conditional expectations are computed by summing `p·f` over every
//! completion of a prefix, never through the martingale closed form, so each
//! check compares two independent routes.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::distributions::MatrixDistribution;
use crate::error::{Error, Result};
use crate::martingale::{certify_bounds, decompose_with_variation, doob_increment};
use crate::matrix::ComplexMatrix;
use crate::output::{fmt_bool, fmt_f64};
use crate::products::{expected_product, normalized_product, ProductInstance};

pub const EXPECTATION_TOL: f64 = 1e-14;
pub const DOOB_TOL: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleResult {
    pub check: &'static str,
    pub distribution: String,
    pub n: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `E[f | X₁..Xₖ = prefix]` by summing over all `n − k` completions.
pub fn conditional_expectation(
    dist: &MatrixDistribution,
    prefix: &[ComplexMatrix],
    n: usize,
) -> Result<ComplexMatrix> {
    if prefix.len() > n {
        return Err(Error::InvalidInput("prefix longer than n".into()));
    }
    let product_of = |seq: Vec<ComplexMatrix>| -> Result<ComplexMatrix> {
        Ok(normalized_product(&ProductInstance::new(seq)?))
    };
    if prefix.len() == n {
        return product_of(prefix.to_vec());
    }
    let mut acc = CompensatedSum::new(dist.dim());
    for (p, suffix) in dist.enumerate_outcomes(n - prefix.len())? {
        let mut seq = prefix.to_vec();
        seq.extend(suffix);
        acc.add(&product_of(seq)?.scale(p));
    }
    Ok(acc.total())
}

/// Entrywise Neumaier summation; plain summation over `4⁸` outcomes drifts
/// past the 1e-14 oracle tolerance.
struct CompensatedSum {
    dim: usize,
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl CompensatedSum {
    fn new(dim: usize) -> Self {
        CompensatedSum {
            dim,
            sum: vec![0.0; 2 * dim * dim],
            comp: vec![0.0; 2 * dim * dim],
        }
    }

    fn add(&mut self, m: &ComplexMatrix) {
        let parts = m.entries().iter().flat_map(|z| [z.re, z.im]);
        for ((s, c), x) in self.sum.iter_mut().zip(&mut self.comp).zip(parts) {
            let t = *s + x;
            *c += if s.abs() >= x.abs() {
                (*s - t) + x
            } else {
                (x - t) + *s
            };
            *s = t;
        }
    }

    fn total(&self) -> ComplexMatrix {
        let data = self
            .sum
            .chunks(2)
            .zip(self.comp.chunks(2))
            .map(|(s, c)| Complex64::new(s[0] + c[0], s[1] + c[1]))
            .collect();
        ComplexMatrix::new(self.dim, data).expect("finite sums")
    }
}

/// All length-`len` sequences over the support (the empty sequence for 0).
fn sequences(dist: &MatrixDistribution, len: usize) -> Result<Vec<Vec<ComplexMatrix>>> {
    if len == 0 {
        Ok(vec![Vec::new()])
    } else {
        Ok(dist
            .enumerate_outcomes(len)?
            .into_iter()
            .map(|(_, s)| s)
            .collect())
    }
}

/// Instance whose first `prefix.len()` samples are `prefix`, padded with the
/// first support point.
fn padded_instance(
    dist: &MatrixDistribution,
    prefix: &[ComplexMatrix],
    n: usize,
) -> Result<ProductInstance> {
    let filler = dist.support()?[0].1.clone();
    let mut seq = prefix.to_vec();
    seq.resize(n, filler);
    ProductInstance::new(seq)
}

/// `max |Σ p·f − (I + μ/n)ⁿ|` over entries.
pub fn exact_expectation_error(dist: &MatrixDistribution, n: usize) -> Result<f64> {
    let exact = conditional_expectation(dist, &[], n)?;
    Ok(exact.max_abs_diff(&expected_product(&dist.mean(), n)?))
}

/// Largest entrywise gap between the closed-form `Yₖ` and
/// `E[f | X₁..Xₖ] − E[f | X₁..Xₖ₋₁]`, over every `k` and prefix.
pub fn doob_identity_error(dist: &MatrixDistribution, n: usize) -> Result<f64> {
    let mu = dist.mean();
    let mut worst: f64 = 0.0;
    for k in 1..=n {
        for prefix in sequences(dist, k)? {
            let oracle = &conditional_expectation(dist, &prefix, n)?
                - &conditional_expectation(dist, &prefix[..k - 1], n)?;
            let closed = doob_increment(k, &padded_instance(dist, &prefix, n)?, &mu)?;
            worst = worst.max(oracle.max_abs_diff(&closed));
        }
    }
    Ok(worst)
}

/// Largest entry of `Σ_x p(x)·Yₖ(prefix, x)` over every `k` and prefix.
pub fn martingale_mean_error(dist: &MatrixDistribution, n: usize) -> Result<f64> {
    let mu = dist.mean();
    let support = dist.support()?;
    let zero = ComplexMatrix::zeros(dist.dim());
    let mut worst: f64 = 0.0;
    for k in 1..=n {
        for prefix in sequences(dist, k - 1)? {
            let mut acc = zero.clone();
            for (p, x) in &support {
                let mut seq = prefix.clone();
                seq.push(x.clone());
                let y = doob_increment(k, &padded_instance(dist, &seq, n)?, &mu)?;
                acc = &acc + &y.scale(*p);
            }
            worst = worst.max(acc.max_abs_diff(&zero));
        }
    }
    Ok(worst)
}

/// Violations of the increment and variation certificates over every full
/// outcome of length `n`.
pub fn variation_violations(dist: &MatrixDistribution, n: usize) -> Result<usize> {
    let mut violations = 0;
    for (_, seq) in dist.enumerate_outcomes(n)? {
        let trace = decompose_with_variation(&ProductInstance::new(seq)?, dist)?;
        let report = certify_bounds(&trace);
        violations += report.increment_violations + report.chain_violations;
        violations += report.variation.map_or(0, |v| v.violations);
    }
    Ok(violations)
}

/// Runs every check for `n = 1..=max_n`.
pub fn run_all(dists: &[MatrixDistribution], max_n: usize) -> Result<Vec<OracleResult>> {
    let mut out = Vec::new();
    for dist in dists {
        let name = format!("{}(d={},L={})", dist.kind(), dist.dim(), dist.scale());
        for n in 1..=max_n {
            let row = |check, max_error: f64, tolerance: f64| OracleResult {
                check,
                distribution: name.clone(),
                n,
                max_error,
                tolerance,
                passed: max_error <= tolerance,
            };
            out.push(row(
                "exact_expectation",
                exact_expectation_error(dist, n)?,
                EXPECTATION_TOL,
            ));
            out.push(row(
                "doob_identity",
                doob_identity_error(dist, n)?,
                DOOB_TOL,
            ));
            out.push(row(
                "martingale_mean",
                martingale_mean_error(dist, n)?,
                DOOB_TOL,
            ));
            out.push(row(
                "bound_violations",
                variation_violations(dist, n)? as f64,
                0.0,
            ));
        }
    }
    Ok(out)
}

/// `check,distribution,n,max_error,tolerance,passed`.
pub fn write_oracle_csv<W: Write>(results: &[OracleResult], mut out: W) -> Result<()> {
    writeln!(out, "check,distribution,n,max_error,tolerance,passed")?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.check,
            r.distribution,
            r.n,
            fmt_f64(r.max_error),
            fmt_f64(r.tolerance),
            fmt_bool(r.passed)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_two_point_checks_pass() {
        let dist = MatrixDistribution::two_point_scalar(1.0).unwrap();
        let results = run_all(&[dist], 4).unwrap();
        assert_eq!(results.len(), 16);
        assert!(results.iter().all(|r| r.passed), "{results:?}");
    }

    #[test]
    fn conditional_expectation_of_full_prefix_is_f() {
        let dist = MatrixDistribution::two_point_scalar(0.5).unwrap();
        let prefix = vec![ComplexMatrix::scalar(1.0), ComplexMatrix::scalar(0.0)];
        let got = conditional_expectation(&dist, &prefix, 2).unwrap();
        assert_eq!(got, ComplexMatrix::scalar(1.5));
    }
}
