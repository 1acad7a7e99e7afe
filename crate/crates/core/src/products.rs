//! The normalized product `f(X₁,…,Xₙ) = ∏ (I + Xᵢ/n)`, its expectation
//! `(I + μ/n)ⁿ`, and the deviation `‖f − e^μ‖`.
//!
//! Factors are multiplied left to right in index order,
//! `((I + X₁/n)(I + X₂/n))···(I + Xₙ/n)`, the same order the martingale
//! increments assume.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{matrix_exp, matrix_power, op_norm, ComplexMatrix};

/// The arguments of `f`: `n` samples of a common dimension.
#[derive(Clone, Debug)]
pub struct ProductInstance {
    samples: Vec<ComplexMatrix>,
}

impl ProductInstance {
    pub fn new(samples: Vec<ComplexMatrix>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::InvalidInput(
                "a product needs at least one factor".into(),
            ));
        };
        let d = first.dim();
        if let Some(bad) = samples.iter().find(|m| m.dim() != d) {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: factor of dim {} among dim {d}",
                bad.dim()
            )));
        }
        Ok(ProductInstance { samples })
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn samples(&self) -> &[ComplexMatrix] {
        &self.samples
    }

    pub(crate) fn check_dim(&self, mu: &ComplexMatrix) -> Result<()> {
        if mu.dim() == self.dim() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "dimension mismatch: mean has dim {}, samples have dim {}",
                mu.dim(),
                self.dim()
            )))
        }
    }
}

/// How the running product is accumulated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Accumulation {
    #[default]
    Plain,
    /// Carries the rounding error of each `P + P·X/n` update in a second
    /// matrix (TwoSum per entry) and folds it back in at the end.
    Compensated,
}

pub fn normalized_product(inst: &ProductInstance) -> ComplexMatrix {
    normalized_product_with(inst, Accumulation::Plain)
}

pub fn normalized_product_with(inst: &ProductInstance, mode: Accumulation) -> ComplexMatrix {
    let inv_n = 1.0 / inst.n() as f64;
    let d = inst.dim();
    match mode {
        Accumulation::Plain => inst
            .samples
            .iter()
            .fold(ComplexMatrix::identity(d), |acc, x| {
                acc.matmul(&x.identity_plus_scaled(inv_n))
            }),
        Accumulation::Compensated => {
            let mut hi = ComplexMatrix::identity(d);
            let mut lo = ComplexMatrix::zeros(d);
            for x in &inst.samples {
                let step = x.scale(inv_n);
                let delta = hi.matmul(&step);
                let carried = &lo + &lo.matmul(&step);
                let mut next_lo = carried;
                for ((h, dl), l) in hi
                    .entries_mut()
                    .iter_mut()
                    .zip(delta.entries())
                    .zip(next_lo.entries_mut())
                {
                    let (re, re_err) = two_sum(h.re, dl.re);
                    let (im, im_err) = two_sum(h.im, dl.im);
                    *h = Complex64::new(re, im);
                    *l += Complex64::new(re_err, im_err);
                }
                lo = next_lo;
            }
            &hi + &lo
        }
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `E[f] = (I + μ/n)ⁿ`.
pub fn expected_product(mu: &ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    matrix_power(&mu.identity_plus_scaled(1.0 / n as f64), n as u64)
}

/// `op_norm(f − e^μ)`.
pub fn deviation(inst: &ProductInstance, mu: &ComplexMatrix) -> Result<f64> {
    inst.check_dim(mu)?;
    let target = matrix_exp(mu)?;
    deviation_from(inst, &target)
}

/// [`deviation`] against a precomputed `e^μ`; avoids re-exponentiating in loops.
pub fn deviation_from(inst: &ProductInstance, exp_mu: &ComplexMatrix) -> Result<f64> {
    inst.check_dim(exp_mu)?;
    op_norm(&(&normalized_product(inst) - exp_mu))
}
