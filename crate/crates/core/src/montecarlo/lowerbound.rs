//! Scalar lower-bound construction.
//!
//! `Xᵢ ∈ {0, 2L}` with equal probability, i.e. `Xᵢ = L + L·Yᵢ` with Rademacher
//! `Yᵢ`, so `E[X] = L`. With `K = #{Yᵢ = +1}`, `Σ Xᵢ/n = 2LK/n` and
//! `∏(1 + Xᵢ/n) = (1 + 2L/n)^K`. The three probabilities reported per `L` are
//!
//! * empirical `Pr[∏(1 + Xᵢ/n) − e^L ≥ c·L·e^L]` (Monte Carlo),
//! * exact `Pr[exp(Σ Xᵢ/n) − e^L ≥ c·L·e^L] = Pr[K ≥ ⌈n/2·(1 + ln(1 + cL)/L)⌉]`,
//! * exact `Pr[Σ Yᵢ/n ≥ c] = Pr[K ≥ ⌈n(1 + c)/2⌉]`, which does not involve `L`.
//!
//! Because `ln(1 + x) ≤ x`, the exp-form threshold never exceeds the
//! Rademacher one, so the exp-form probability is at least the floor.
//!
//! Thresholds that land within 1e-9 (relative) of an integer are snapped to
//! it before taking the ceiling, so `100·1.1/2` counts as 55, not 56.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binomial::{binomial_upper_tail, clopper_pearson};
use super::tail::CI_ALPHA;
use crate::error::{Error, Result};
use crate::output::fmt_f64;
use crate::rng::RandomStream;

const SNAP_RTOL: f64 = 1e-9;

/// `⌈x⌉`, treating values within 1e-9 relative of an integer as that integer.
pub fn snapped_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= SNAP_RTOL * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

fn count_threshold(x: f64) -> u64 {
    let c = snapped_ceil(x);
    if c <= 0.0 {
        0
    } else {
        c as u64
    }
}

/// Smallest `K` with `exp(2LK/n) − e^L ≥ c·L·e^L`.
pub fn exp_form_threshold(l: f64, c: f64, n: u64) -> u64 {
    count_threshold(n as f64 / 2.0 * (1.0 + (c * l).ln_1p() / l))
}

/// Smallest `K` with `(2K − n)/n ≥ c`.
pub fn rademacher_threshold(c: f64, n: u64) -> u64 {
    count_threshold(n as f64 * (1.0 + c) / 2.0)
}

/// Smallest `K` with `(1 + 2L/n)^K − e^L ≥ c·L·e^L`.
pub fn product_form_threshold(l: f64, c: f64, n: u64) -> u64 {
    count_threshold((l + (c * l).ln_1p()) / (2.0 * l / n as f64).ln_1p())
}

/// Exact `Pr[exp(Σ Xᵢ/n) − e^L ≥ c·L·e^L]`.
pub fn exact_exp_form_prob(l: f64, c: f64, n: u64) -> f64 {
    binomial_upper_tail(n, 0.5, exp_form_threshold(l, c, n))
}

/// Exact `Pr[Σ Yᵢ/n ≥ c]`.
pub fn rademacher_floor(c: f64, n: u64) -> f64 {
    binomial_upper_tail(n, 0.5, rademacher_threshold(c, n))
}

/// Exact `Pr[∏(1 + Xᵢ/n) − e^L ≥ c·L·e^L]`, the quantity the Monte Carlo
/// column estimates.
pub fn exact_product_form_prob(l: f64, c: f64, n: u64) -> f64 {
    binomial_upper_tail(n, 0.5, product_form_threshold(l, c, n))
}

/// `|∏(1 + Xᵢ/n) − exp(Σ Xᵢ/n)| / exp(Σ Xᵢ/n)` for an outcome with `K` draws at `2L`.
pub fn product_exp_relative_gap(l: f64, n: u64, k: u64) -> f64 {
    let x = 2.0 * l / n as f64;
    // (1+x)^K / e^(Kx) = exp(K·(ln(1+x) − x))
    (k as f64 * (x.ln_1p() - x)).exp_m1().abs()
}

/// Number of `+1` signs among `n` Rademacher draws from stream `(seed, trial)`;
/// each bit of the stream is one draw.
fn plus_count(n: u64, seed: u64, trial: u64) -> u64 {
    let mut stream = RandomStream::new(seed, trial);
    let full = n / 64;
    let rest = n % 64;
    let mut count: u64 = (0..full)
        .map(|_| rand::RngCore::next_u64(&mut stream).count_ones() as u64)
        .sum();
    if rest > 0 {
        let word = rand::RngCore::next_u64(&mut stream) & ((1u64 << rest) - 1);
        count += word.count_ones() as u64;
    }
    count
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundRow {
    #[serde(rename = "L")]
    pub l: f64,
    pub c: f64,
    pub n: u64,
    pub empirical_count: u64,
    pub trials: u64,
    pub empirical_product_prob: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub exact_exp_form_prob: f64,
    pub rademacher_floor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowerBoundReport {
    pub l_values: Vec<f64>,
    pub c: f64,
    pub n: u64,
    pub trials: u64,
    pub seed: u64,
    pub empirical_counts: Vec<u64>,
    pub empirical_probs: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub exp_form_probs: Vec<f64>,
    pub rademacher_floor: f64,
}

impl LowerBoundReport {
    pub fn rows(&self) -> Vec<LowerBoundRow> {
        self.l_values
            .iter()
            .enumerate()
            .map(|(i, &l)| LowerBoundRow {
                l,
                c: self.c,
                n: self.n,
                empirical_count: self.empirical_counts[i],
                trials: self.trials,
                empirical_product_prob: self.empirical_probs[i],
                ci_low: self.ci_low[i],
                ci_high: self.ci_high[i],
                exact_exp_form_prob: self.exp_form_probs[i],
                rademacher_floor: self.rademacher_floor,
            })
            .collect()
    }
}

/// Runs the lower-bound construction for every `L`. All `L` share the same
/// `trials` sign sequences, drawn from streams `(seed, 0..trials)`.
pub fn lower_bound_experiment(
    l_values: &[f64],
    c: f64,
    n: u64,
    trials: u64,
    seed: u64,
) -> Result<LowerBoundReport> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Config(format!("c must be positive, got {c}")));
    }
    if l_values.is_empty() || l_values.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::Config("L values must be positive".into()));
    }
    if n == 0 || trials == 0 {
        return Err(Error::Config("n and trials must be positive".into()));
    }
    let thresholds: Vec<u64> = l_values
        .iter()
        .map(|&l| product_form_threshold(l, c, n))
        .collect();
    let counts = (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; l_values.len()],
            |mut acc, trial| {
                let k = plus_count(n, seed, trial);
                for (slot, (&l, &thr)) in acc.iter_mut().zip(l_values.iter().zip(&thresholds)) {
                    // Direct event test; the threshold only short-circuits clear cases.
                    let hit = if k + 1 < thr {
                        false
                    } else if k > thr + 1 {
                        true
                    } else {
                        let product = (k as f64 * (2.0 * l / n as f64).ln_1p()).exp();
                        product - l.exp() >= c * l * l.exp()
                    };
                    *slot += hit as u64;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; l_values.len()],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let empirical_probs = counts.iter().map(|&k| k as f64 / trials as f64).collect();
    let (ci_low, ci_high) = counts
        .iter()
        .map(|&k| clopper_pearson(k, trials, CI_ALPHA))
        .unzip();
    Ok(LowerBoundReport {
        l_values: l_values.to_vec(),
        c,
        n,
        trials,
        seed,
        empirical_counts: counts,
        empirical_probs,
        ci_low,
        ci_high,
        exp_form_probs: l_values
            .iter()
            .map(|&l| exact_exp_form_prob(l, c, n))
            .collect(),
        rademacher_floor: rademacher_floor(c, n),
    })
}

/// `L,c,n,empirical_product_prob,exact_exp_form_prob,rademacher_floor`, one
/// row per `(report, L)`.
pub fn write_lower_bound_csv<W: Write>(reports: &[LowerBoundReport], mut out: W) -> Result<()> {
    writeln!(
        out,
        "L,c,n,empirical_product_prob,exact_exp_form_prob,rademacher_floor"
    )?;
    for report in reports {
        for row in report.rows() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f64(row.l),
                fmt_f64(row.c),
                row.n,
                fmt_f64(row.empirical_product_prob),
                fmt_f64(row.exact_exp_form_prob),
                fmt_f64(row.rademacher_floor)
            )?;
        }
    }
    Ok(())
}
