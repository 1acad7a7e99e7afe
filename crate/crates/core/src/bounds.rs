//! Closed-form tail bounds for normalized products and for matrix sums, and
//! their inversions from a failure probability `δ` to a deviation `t`.
//!
//! All logarithms are natural. Probability bounds are returned raw and may
//! exceed 1; [`BoundValue::clamped`] caps them.
//!
//! | evaluator          | value                                                                  | valid when |
//! |--------------------|------------------------------------------------------------------------|------------|
//! | [`bernstein_tail`] | `2d·exp(−n t²/(2L²))`                                                   | `t ≤ L√(ln d/n)`, `n ≥ ln d` |
//! | [`main_tail`]      | `2d·exp(−c n t²/(L² e^(2L)))`                                           | `t ≤ L e^L √(ln d/n)` |
//! | [`main_deviation`] | `L e^L/√(c n) · √(ln(2d/δ))`                                            | always |
//! | [`hw19_deviation`] | `h·L e^L ln n/√n·(√(ln(d/δ) + ln²n) + ln n/√n) + L² e^L/n`               | `max{3, L e²} ≤ ln n + 1 ≤ (16n/ln(dne/δ))^(1/3)` |
//! | [`hw19_tail`]      | the `2δ` at which [`hw19_deviation`] equals `t`                          | as above |
//! | [`freedman_tail`]  | `2d·exp(−c t²/(R t + σ²))`                                               | always |
//!
//! The constants `c` and `h` (`hw_constant`) are not pinned by the theory;
//! they are explicit parameters. [`DEFAULT_C`] = 1/8 is a conventional
//! choice, not a derived one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conventional default for the absolute constant `c`. Not derived.
pub const DEFAULT_C: f64 = 0.125;

/// Default for the `O(·)` constant of the Henriksen–Ward deviation bound.
pub const DEFAULT_HW_CONSTANT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: u64,
    pub d: u64,
    #[serde(rename = "L")]
    pub l: f64,
    pub t: f64,
    pub delta: f64,
    pub c: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub sigma2: f64,
    pub hw_constant: f64,
}

impl BoundParams {
    /// `t = 0`, `δ = 0.05`, default constants, `R = σ² = 0`.
    pub fn new(n: u64, d: u64, l: f64) -> Self {
        BoundParams {
            n,
            d,
            l,
            t: 0.0,
            delta: 0.05,
            c: DEFAULT_C,
            r: 0.0,
            sigma2: 0.0,
            hw_constant: DEFAULT_HW_CONSTANT,
        }
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_freedman(mut self, r: f64, sigma2: f64) -> Self {
        self.r = r;
        self.sigma2 = sigma2;
        self
    }

    pub fn with_hw_constant(mut self, h: f64) -> Self {
        self.hw_constant = h;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        let nonnegative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} must be nonnegative, got {v}"
                )))
            }
        };
        if self.n == 0 || self.d == 0 {
            return Err(Error::Config("n and d must be positive".into()));
        }
        positive("L", self.l)?;
        positive("c", self.c)?;
        positive("hw_constant", self.hw_constant)?;
        nonnegative("t", self.t)?;
        nonnegative("R", self.r)?;
        nonnegative("sigma2", self.sigma2)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// A bound together with whether its parameters lie in the window where the
/// bound is asserted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundValue {
    pub value: f64,
    pub valid: bool,
}

impl BoundValue {
    /// Probability bounds capped at 1.
    pub fn clamped(&self) -> f64 {
        self.value.min(1.0)
    }
}

fn ln(x: f64) -> f64 {
    x.ln()
}

pub fn bernstein_tail(p: &BoundParams) -> BoundValue {
    let (n, d) = (p.n as f64, p.d as f64);
    let value = 2.0 * d * (-n * p.t * p.t / (2.0 * p.l * p.l)).exp();
    let valid = p.t <= p.l * (ln(d) / n).sqrt() && n >= ln(d);
    BoundValue { value, valid }
}

pub fn main_tail(p: &BoundParams) -> BoundValue {
    let (n, d) = (p.n as f64, p.d as f64);
    let scale2 = p.l * p.l * (2.0 * p.l).exp();
    let value = 2.0 * d * (-p.c * n * p.t * p.t / scale2).exp();
    let valid = p.t <= p.l * p.l.exp() * (ln(d) / n).sqrt();
    BoundValue { value, valid }
}

/// The `t` at which [`main_tail`] equals `δ`.
pub fn main_deviation(p: &BoundParams) -> f64 {
    let (n, d) = (p.n as f64, p.d as f64);
    p.l * p.l.exp() / (p.c * n).sqrt() * ln(2.0 * d / p.delta).sqrt()
}

pub fn hw19_deviation(p: &BoundParams) -> BoundValue {
    let (n, d) = (p.n as f64, p.d as f64);
    let log_n = ln(n);
    let el = p.l.exp();
    let value = p.hw_constant * p.l * el * log_n / n.sqrt()
        * ((ln(d / p.delta) + log_n * log_n).sqrt() + log_n / n.sqrt())
        + p.l * p.l * el / n;
    let lower = 3.0_f64.max(p.l * std::f64::consts::E.powi(2));
    let upper = (16.0 * n / ln(d * n * std::f64::consts::E / p.delta)).cbrt();
    let valid = lower <= log_n + 1.0 && log_n + 1.0 <= upper;
    BoundValue { value, valid }
}

/// Tail probability implied by [`hw19_deviation`]: the `2δ` for which the
/// deviation bound equals `t`. Writing the bound as `A·(√(ln(d/δ) + ln²n) + B) + C`,
/// this is `2d·exp(ln²n − s²)` with `s = (t − C)/A − B`, and `+∞` when `s < 0`
/// (no `δ` reaches that deviation). The validity flag is that of
/// [`hw19_deviation`] at the solved `δ`.
pub fn hw19_tail(p: &BoundParams) -> BoundValue {
    let (n, d) = (p.n as f64, p.d as f64);
    let log_n = ln(n);
    let el = p.l.exp();
    let a = p.hw_constant * p.l * el * log_n / n.sqrt();
    let b = log_n / n.sqrt();
    let c = p.l * p.l * el / n;
    let s = (p.t - c) / a - b;
    if !(s >= 0.0) || a == 0.0 {
        return BoundValue {
            value: f64::INFINITY,
            valid: false,
        };
    }
    let delta = d * (log_n * log_n - s * s).exp();
    let valid = delta > 0.0 && delta < 1.0 && hw19_deviation(&p.with_delta(delta)).valid;
    BoundValue {
        value: 2.0 * delta,
        valid,
    }
}

/// `2d·exp(−c t²/(R t + σ²))`; a degenerate martingale (`R t + σ² = 0`)
/// gives 0 for `t > 0` and `2d` at `t = 0`.
pub fn freedman_tail(p: &BoundParams) -> BoundValue {
    let d = p.d as f64;
    let denom = p.r * p.t + p.sigma2;
    let value = if p.t == 0.0 {
        2.0 * d
    } else if denom == 0.0 {
        0.0
    } else {
        2.0 * d * (-p.c * p.t * p.t / denom).exp()
    };
    BoundValue { value, valid: true }
}
