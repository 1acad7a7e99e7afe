//! Doob martingale of the normalized product.
//!
//! With `A = I + μ/n` and `Pₖ = (I + X₁/n)···(I + Xₖ/n)`, the increments
//!
//! ```text
//! Yₖ = E[f | X₁..Xₖ] − E[f | X₁..Xₖ₋₁] = Pₖ₋₁ · (Xₖ − μ)/n · A^(n−k)
//! ```
//!
//! telescope to `Σ Yₖ = f − Aⁿ`. When every `‖Xᵢ‖ ≤ L` (hence `‖μ‖ ≤ L`),
//!
//! ```text
//! ‖Yₖ‖ ≤ (2L/n)(1 + L/n)^(n−1) ≤ 2L·e^L/n                         (R)
//! ‖E[Yₖ Yₖ* | X₁..Xₖ₋₁]‖ ≤ (4L²/n²)(1 + L/n)^(2n−2) ≤ 4L²e^(2L)/n²
//! ```
//!
//! and summing the second line over `k ≤ n` gives the variation bound
//! `σ² = 4L²e^(2L)/n`. The same holds with `Yₖ* Yₖ`.

use std::io::Write;

use crate::distributions::MatrixDistribution;
use crate::error::{Error, Result};
use crate::matrix::{matrix_power, op_norm, ComplexMatrix};
use crate::output::fmt_f64;
use crate::products::ProductInstance;

/// Relative slack allowed before a bound counts as violated.
pub const BOUND_RTOL: f64 = 1e-12;

/// Absolute slack on the norm hypothesis `‖Xᵢ‖ ≤ L`.
pub const HYPOTHESIS_ATOL: f64 = 1e-12;

/// Which predictable variation: `E[Y Y*|·]` or `E[Y* Y|·]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// `2L·e^L/n`.
pub fn increment_bound(l: f64, n: usize) -> f64 {
    2.0 * l * l.exp() / n as f64
}

/// `(2L/n)(1 + L/n)^(n−1)`, the sharper intermediate step of the increment bound.
pub fn increment_chain_bound(l: f64, n: usize) -> f64 {
    let nf = n as f64;
    2.0 * l / nf * (1.0 + l / nf).powi(n as i32 - 1)
}

/// `4L²e^(2L)/n`.
pub fn variation_bound(l: f64, n: usize) -> f64 {
    4.0 * l * l * (2.0 * l).exp() / n as f64
}

/// `4L²e^(2L)·k/n²`, the variation bound after `k` steps.
pub fn running_variation_bound(l: f64, n: usize, k: usize) -> f64 {
    4.0 * l * l * (2.0 * l).exp() * k as f64 / (n as f64 * n as f64)
}

/// Norms of the predictable variations along a trace (exact mode only).
#[derive(Clone, Debug)]
pub struct VariationTrace {
    /// `‖W⁽¹⁾ₖ‖`, `W⁽¹⁾ₖ = Σ_{i≤k} E[Yᵢ Yᵢ* | X₁..Xᵢ₋₁]`.
    pub w1_norms: Vec<f64>,
    /// `‖W⁽²⁾ₖ‖`, the `Yᵢ* Yᵢ` counterpart.
    pub w2_norms: Vec<f64>,
    /// `‖E[Yₖ Yₖ* | ·]‖` per step.
    pub w1_step_norms: Vec<f64>,
    pub w2_step_norms: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MartingaleTrace {
    pub n: usize,
    pub l: f64,
    pub increments: Vec<ComplexMatrix>,
    pub partial_sums: Vec<ComplexMatrix>,
    pub increment_norms: Vec<f64>,
    pub partial_sum_norms: Vec<f64>,
    pub variation: Option<VariationTrace>,
    /// `2L·e^L/n`.
    pub r_bound: f64,
    /// `4L²e^(2L)/n`.
    pub sigma2_bound: f64,
}

impl MartingaleTrace {
    /// Trace CSV: `k,increment_norm,partial_sum_norm,w1_norm,w2_norm,r_bound,sigma2_bound`.
    /// Variation columns are empty when the variations were not computed.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "k,increment_norm,partial_sum_norm,w1_norm,w2_norm,r_bound,sigma2_bound"
        )?;
        for k in 0..self.n {
            let (w1, w2) = match &self.variation {
                Some(v) => (fmt_f64(v.w1_norms[k]), fmt_f64(v.w2_norms[k])),
                None => (String::new(), String::new()),
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                k + 1,
                fmt_f64(self.increment_norms[k]),
                fmt_f64(self.partial_sum_norms[k]),
                w1,
                w2,
                fmt_f64(self.r_bound),
                fmt_f64(self.sigma2_bound)
            )?;
        }
        Ok(())
    }
}

/// `(I + μ/n)^j` for `j = 0..n`.
fn mean_factor_powers(mu: &ComplexMatrix, n: usize) -> Vec<ComplexMatrix> {
    let factor = mu.identity_plus_scaled(1.0 / n as f64);
    let mut powers = Vec::with_capacity(n);
    powers.push(ComplexMatrix::identity(mu.dim()));
    for j in 1..n {
        let next = powers[j - 1].matmul(&factor);
        powers.push(next);
    }
    powers
}

fn increment_from_parts(
    prefix: &ComplexMatrix,
    x: &ComplexMatrix,
    mu: &ComplexMatrix,
    suffix: &ComplexMatrix,
    n: usize,
) -> ComplexMatrix {
    let centered = (x - mu).scale(1.0 / n as f64);
    prefix.matmul(&centered).matmul(suffix)
}

/// `Yₖ` for 1-based `k`, straight from the closed form.
pub fn doob_increment(
    k: usize,
    inst: &ProductInstance,
    mu: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let n = inst.n();
    if k == 0 || k > n {
        return Err(Error::Index(format!("increment index {k} outside 1..={n}")));
    }
    inst.check_dim(mu)?;
    let inv_n = 1.0 / n as f64;
    let prefix = inst.samples()[..k - 1]
        .iter()
        .fold(ComplexMatrix::identity(inst.dim()), |acc, x| {
            acc.matmul(&x.identity_plus_scaled(inv_n))
        });
    let suffix = matrix_power(&mu.identity_plus_scaled(inv_n), (n - k) as u64)?;
    Ok(increment_from_parts(
        &prefix,
        &inst.samples()[k - 1],
        mu,
        &suffix,
        n,
    ))
}

fn check_hypothesis(inst: &ProductInstance, mu: &ComplexMatrix, l: f64) -> Result<()> {
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::InvalidInput(format!("L must be positive, got {l}")));
    }
    let mu_norm = op_norm(mu)?;
    if mu_norm > l + HYPOTHESIS_ATOL {
        return Err(Error::Hypothesis(format!(
            "mean norm {mu_norm} exceeds L = {l}"
        )));
    }
    for (i, x) in inst.samples().iter().enumerate() {
        let norm = op_norm(x)?;
        if norm > l + HYPOTHESIS_ATOL {
            return Err(Error::Hypothesis(format!(
                "sample {} has norm {norm} > L = {l}",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Full trace with prefix products cached, `O(n·d³)`.
pub fn decompose(inst: &ProductInstance, mu: &ComplexMatrix, l: f64) -> Result<MartingaleTrace> {
    build_trace(inst, mu, l, None)
}

/// [`decompose`] plus exact predictable variations, for finitely supported
/// distributions. `L` is the distribution's certified norm bound.
pub fn decompose_with_variation(
    inst: &ProductInstance,
    dist: &MatrixDistribution,
) -> Result<MartingaleTrace> {
    let support = dist.support()?;
    build_trace(inst, &dist.mean(), dist.norm_bound(), Some(&support))
}

fn build_trace(
    inst: &ProductInstance,
    mu: &ComplexMatrix,
    l: f64,
    support: Option<&[(f64, ComplexMatrix)]>,
) -> Result<MartingaleTrace> {
    inst.check_dim(mu)?;
    check_hypothesis(inst, mu, l)?;
    let n = inst.n();
    let d = inst.dim();
    let inv_n = 1.0 / n as f64;
    let powers = mean_factor_powers(mu, n);

    let mut increments = Vec::with_capacity(n);
    let mut partial_sums = Vec::with_capacity(n);
    let mut increment_norms = Vec::with_capacity(n);
    let mut partial_sum_norms = Vec::with_capacity(n);
    let mut variation = support.map(|_| VariationTrace {
        w1_norms: Vec::with_capacity(n),
        w2_norms: Vec::with_capacity(n),
        w1_step_norms: Vec::with_capacity(n),
        w2_step_norms: Vec::with_capacity(n),
    });
    let mut w1 = ComplexMatrix::zeros(d);
    let mut w2 = ComplexMatrix::zeros(d);

    let mut prefix = ComplexMatrix::identity(d);
    let mut running = ComplexMatrix::zeros(d);
    for (idx, x) in inst.samples().iter().enumerate() {
        let k = idx + 1;
        let suffix = &powers[n - k];
        if let (Some(support), Some(var)) = (support, variation.as_mut()) {
            let step1 = variation_from_parts(&prefix, support, mu, suffix, n, Side::Left);
            let step2 = variation_from_parts(&prefix, support, mu, suffix, n, Side::Right);
            var.w1_step_norms.push(op_norm(&step1)?);
            var.w2_step_norms.push(op_norm(&step2)?);
            w1 = &w1 + &step1;
            w2 = &w2 + &step2;
            var.w1_norms.push(op_norm(&w1)?);
            var.w2_norms.push(op_norm(&w2)?);
        }
        let y = increment_from_parts(&prefix, x, mu, suffix, n);
        running = &running + &y;
        increment_norms.push(op_norm(&y)?);
        partial_sum_norms.push(op_norm(&running)?);
        increments.push(y);
        partial_sums.push(running.clone());
        prefix = prefix.matmul(&x.identity_plus_scaled(inv_n));
    }

    Ok(MartingaleTrace {
        n,
        l,
        increments,
        partial_sums,
        increment_norms,
        partial_sum_norms,
        variation,
        r_bound: increment_bound(l, n),
        sigma2_bound: variation_bound(l, n),
    })
}

fn variation_from_parts(
    prefix: &ComplexMatrix,
    support: &[(f64, ComplexMatrix)],
    mu: &ComplexMatrix,
    suffix: &ComplexMatrix,
    n: usize,
    side: Side,
) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(mu.dim());
    for (p, x) in support {
        let y = increment_from_parts(prefix, x, mu, suffix, n);
        let outer = match side {
            Side::Left => y.matmul(&y.adjoint()),
            Side::Right => y.adjoint().matmul(&y),
        };
        acc = &acc + &outer.scale(*p);
    }
    acc
}

/// `E[Yₖ Yₖ* | X₁..Xₖ₋₁]` (or `Yₖ* Yₖ`), by exact summation over the
/// support of `Xₖ`. `prefix` holds the `k − 1` conditioned samples.
pub fn predictable_variation(
    k: usize,
    prefix: &[ComplexMatrix],
    dist: &MatrixDistribution,
    n: usize,
    side: Side,
) -> Result<ComplexMatrix> {
    if k == 0 || k > n {
        return Err(Error::Index(format!("variation index {k} outside 1..={n}")));
    }
    if prefix.len() != k - 1 {
        return Err(Error::InvalidInput(format!(
            "step {k} conditions on {} samples, got {}",
            k - 1,
            prefix.len()
        )));
    }
    let support = dist.support()?;
    let mu = dist.mean();
    let inv_n = 1.0 / n as f64;
    let mut prefix_product = ComplexMatrix::identity(dist.dim());
    for x in prefix {
        prefix_product = prefix_product.try_matmul(&x.identity_plus_scaled(inv_n))?;
    }
    let suffix = matrix_power(&mu.identity_plus_scaled(inv_n), (n - k) as u64)?;
    Ok(variation_from_parts(
        &prefix_product,
        &support,
        &mu,
        &suffix,
        n,
        side,
    ))
}

/// Outcome of checking a trace against the increment and variation bounds.
#[derive(Clone, Debug)]
pub struct CertificationReport {
    pub n: usize,
    pub l: f64,
    pub r_bound: f64,
    pub max_increment_norm: f64,
    /// `r_bound − max_increment_norm`.
    pub increment_slack: f64,
    /// Steps with `‖Yₖ‖ > r_bound·(1 + 1e-12)`.
    pub increment_violations: usize,
    /// Steps exceeding the sharper `(2L/n)(1 + L/n)^(n−1)`.
    pub chain_violations: usize,
    pub variation: Option<VariationCertificate>,
}

#[derive(Clone, Debug)]
pub struct VariationCertificate {
    pub sigma2_bound: f64,
    /// `Σₖ ‖E[Yₖ Yₖ* | ·]‖`.
    pub w1_step_sum: f64,
    pub w2_step_sum: f64,
    pub w1_slack: f64,
    pub w2_slack: f64,
    /// Steps `k` where `‖W⁽¹⁾ₖ‖` or `‖W⁽²⁾ₖ‖` exceeds `4L²e^(2L)·k/n²`,
    /// plus one if either step sum exceeds `sigma2_bound`.
    pub violations: usize,
}

impl CertificationReport {
    pub fn certified(&self) -> bool {
        self.increment_violations == 0
            && self.chain_violations == 0
            && self.variation.as_ref().is_none_or(|v| v.violations == 0)
    }
}

fn exceeds(value: f64, bound: f64) -> bool {
    value > bound * (1.0 + BOUND_RTOL)
}

/// Checks a trace against its bounds. Violations are counted, never raised.
pub fn certify_bounds(trace: &MartingaleTrace) -> CertificationReport {
    let n = trace.n;
    let max_increment_norm = trace.increment_norms.iter().copied().fold(0.0, f64::max);
    let chain = increment_chain_bound(trace.l, n);
    let increment_violations = trace
        .increment_norms
        .iter()
        .filter(|&&v| exceeds(v, trace.r_bound))
        .count();
    let chain_violations = trace
        .increment_norms
        .iter()
        .filter(|&&v| exceeds(v, chain))
        .count();

    let variation = trace.variation.as_ref().map(|v| {
        let w1_step_sum: f64 = v.w1_step_norms.iter().sum();
        let w2_step_sum: f64 = v.w2_step_norms.iter().sum();
        let mut violations = (0..n)
            .filter(|&i| {
                let bound = running_variation_bound(trace.l, n, i + 1);
                exceeds(v.w1_norms[i], bound) || exceeds(v.w2_norms[i], bound)
            })
            .count();
        if exceeds(w1_step_sum, trace.sigma2_bound) || exceeds(w2_step_sum, trace.sigma2_bound) {
            violations += 1;
        }
        VariationCertificate {
            sigma2_bound: trace.sigma2_bound,
            w1_step_sum,
            w2_step_sum,
            w1_slack: trace.sigma2_bound - w1_step_sum,
            w2_slack: trace.sigma2_bound - w2_step_sum,
            violations,
        }
    });

    CertificationReport {
        n,
        l: trace.l,
        r_bound: trace.r_bound,
        max_increment_norm,
        increment_slack: trace.r_bound - max_increment_norm,
        increment_violations,
        chain_violations,
        variation,
    }
}
