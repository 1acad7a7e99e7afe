//! Exact binomial tails and Clopper–Pearson intervals.

use statrs::function::beta::beta_reg;

/// `Pr[Bin(n, p) ≥ m]`.
///
/// Terms are generated by the ratio recurrence outward from the mode, where
/// the unnormalized term is fixed at 1, and the tail is divided by the total.
/// Nothing overflows, and terms far from the mode underflow harmlessly to 0.
pub fn binomial_upper_tail(n: u64, p: f64, m: u64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "p must lie in [0, 1]");
    if m == 0 {
        return 1.0;
    }
    if m > n {
        return 0.0;
    }
    if p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return 1.0;
    }
    let odds = p / (1.0 - p);
    let mode = (((n + 1) as f64) * p).floor().min(n as f64) as u64;

    // term(k+1)/term(k) = (n−k)/(k+1)·odds
    let mut upper_total = 0.0;
    let mut tail = 0.0;
    let mut term = 1.0;
    for k in mode..=n {
        if k > mode {
            term *= (n - k + 1) as f64 / k as f64 * odds;
        }
        upper_total += term;
        if k >= m {
            tail += term;
        }
        if term == 0.0 {
            break;
        }
    }
    let mut lower_total = 0.0;
    let mut term = 1.0;
    for k in (0..mode).rev() {
        term *= (k + 1) as f64 / ((n - k) as f64 * odds);
        lower_total += term;
        if k >= m {
            tail += term;
        }
        if term == 0.0 {
            break;
        }
    }
    (tail / (upper_total + lower_total)).min(1.0)
}

/// Inverse of the regularized incomplete beta function in `x`, by bisection.
fn beta_reg_inverse(a: f64, b: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two-sided Clopper–Pearson interval for `successes` out of `trials` at
/// confidence `1 − alpha`.
pub fn clopper_pearson(successes: u64, trials: u64, alpha: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let (x, n) = (successes as f64, trials as f64);
    let low = if successes == 0 {
        0.0
    } else {
        beta_reg_inverse(x, n - x + 1.0, alpha / 2.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        beta_reg_inverse(x + 1.0, n - x, 1.0 - alpha / 2.0)
    };
    (low, high)
}
