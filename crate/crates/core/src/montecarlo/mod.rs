//! Empirical tail estimation for `‖f − e^μ‖`, comparison against the closed-form
//! bounds, and the scalar lower-bound experiment.

pub mod binomial;
pub mod lowerbound;
pub mod tail;

pub use binomial::{binomial_upper_tail, clopper_pearson};
pub use lowerbound::{lower_bound_experiment, LowerBoundReport, LowerBoundRow};
pub use tail::{
    admissible_c, compare_bounds, estimate_tail, estimate_tail_with_workers, Comparison,
    ComparisonRow, TailConfig, TailEstimate,
};

/// Default `t` grid: 26 points from 0 to `2·L·e^L·√(ln d/n)`. For `d = 1`,
/// where `ln d = 0`, `ln 2` stands in so the grid is not degenerate.
pub fn default_t_grid(l: f64, d: usize, n: usize) -> Vec<f64> {
    let log_d = (d as f64).ln().max(std::f64::consts::LN_2);
    let top = 2.0 * l * l.exp() * (log_d / n as f64).sqrt();
    (0..26).map(|i| top * i as f64 / 25.0).collect()
}

pub const DEFAULT_L_VALUES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
pub const DEFAULT_C_VALUES: [f64; 3] = [0.05, 0.1, 0.2];
