use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binomial::clopper_pearson;
use crate::bounds::{bernstein_tail, freedman_tail, hw19_tail, main_tail, BoundParams};
use crate::distributions::{DistributionKind, MatrixDistribution};
use crate::error::{Error, Result};
use crate::matrix::matrix_exp;
use crate::output::{fmt_bool, fmt_f64};
use crate::products::{deviation_from, ProductInstance};
use crate::rng::RandomStream;

/// Two-sided confidence level of the reported intervals.
pub const CI_ALPHA: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailConfig {
    pub kind: DistributionKind,
    pub d: usize,
    /// Certified norm bound of the distribution.
    #[serde(rename = "L")]
    pub l: f64,
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
}

/// Empirical `Pr[‖f − e^μ‖ ≥ t]` on a grid of `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct TailEstimate {
    pub t_grid: Vec<f64>,
    pub counts: Vec<u64>,
    pub trials: u64,
    pub p_hat: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub config: TailConfig,
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::Config("t grid is empty".into()));
    }
    if t_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Config(
            "t grid values must be finite and nonnegative".into(),
        ));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("t grid must be strictly ascending".into()));
    }
    Ok(())
}

/// Deviation `‖f − e^μ‖` of one trial: `n` fresh draws from stream `(seed, trial)`.
pub fn trial_deviation(
    dist: &MatrixDistribution,
    exp_mu: &crate::matrix::ComplexMatrix,
    n: usize,
    seed: u64,
    trial: u64,
) -> Result<f64> {
    let mut stream = RandomStream::new(seed, trial);
    let samples = (0..n).map(|_| dist.sample(&mut stream)).collect();
    deviation_from(&ProductInstance::new(samples)?, exp_mu)
}

/// Monte Carlo tail estimate on the current rayon pool. Counts are summed
/// as integers, so the result does not depend on the number of workers.
pub fn estimate_tail(
    dist: &MatrixDistribution,
    n: usize,
    trials: u64,
    t_grid: &[f64],
    seed: u64,
) -> Result<TailEstimate> {
    check_grid(t_grid)?;
    if trials == 0 || n == 0 {
        return Err(Error::Config("trials and n must be positive".into()));
    }
    let exp_mu = matrix_exp(&dist.mean())?;
    let counts = (0..trials)
        .into_par_iter()
        .map(|trial| trial_deviation(dist, &exp_mu, n, seed, trial))
        .try_fold(
            || vec![0u64; t_grid.len()],
            |mut acc, dev| {
                let dev = dev?;
                // Grid is ascending: exceedances form a prefix.
                let hits = t_grid.partition_point(|&t| t <= dev);
                acc[..hits].iter_mut().for_each(|c| *c += 1);
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(
            || vec![0u64; t_grid.len()],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(assemble(
        t_grid.to_vec(),
        counts,
        TailConfig {
            kind: dist.kind(),
            d: dist.dim(),
            l: dist.norm_bound(),
            n,
            trials,
            seed,
        },
    ))
}

/// Same as [`estimate_tail`] on a dedicated pool of `workers` threads.
pub fn estimate_tail_with_workers(
    dist: &MatrixDistribution,
    n: usize,
    trials: u64,
    t_grid: &[f64],
    seed: u64,
    workers: usize,
) -> Result<TailEstimate> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| estimate_tail(dist, n, trials, t_grid, seed))
}

fn assemble(t_grid: Vec<f64>, counts: Vec<u64>, config: TailConfig) -> TailEstimate {
    let trials = config.trials;
    let p_hat = counts.iter().map(|&c| c as f64 / trials as f64).collect();
    let (ci_low, ci_high) = counts
        .iter()
        .map(|&c| clopper_pearson(c, trials, CI_ALPHA))
        .unzip();
    TailEstimate {
        t_grid,
        counts,
        trials,
        p_hat,
        ci_low,
        ci_high,
        config,
    }
}

/// One row of [`compare_bounds`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub t: f64,
    pub count: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bernstein: f64,
    pub bernstein_valid: bool,
    pub main: f64,
    pub main_valid: bool,
    pub hw19: f64,
    pub freedman: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub trials: u64,
    pub params: BoundParams,
    pub rows: Vec<ComparisonRow>,
    /// Largest `c` with `main_tail ≥ ci_high` at every valid `t > 0`;
    /// `+∞` when no grid point constrains it.
    pub admissible_c: f64,
}

/// Largest `c` such that `2d·exp(−c n t²/(L² e^(2L))) ≥ ci_high` at every
/// grid point inside the main bound's validity window.
pub fn admissible_c(est: &TailEstimate, params: &BoundParams) -> f64 {
    let (n, d, l) = (params.n as f64, params.d as f64, params.l);
    let scale2 = l * l * (2.0 * l).exp();
    est.t_grid
        .iter()
        .zip(&est.ci_high)
        .filter(|(&t, _)| t > 0.0 && main_tail(&params.with_t(t)).valid)
        .map(|(&t, &hi)| scale2 * (2.0 * d / hi).ln() / (n * t * t))
        .fold(f64::INFINITY, f64::min)
}

/// Puts the empirical tail next to every bound evaluated at the same `t`.
pub fn compare_bounds(est: &TailEstimate, params: &BoundParams) -> Result<Comparison> {
    let cfg = &est.config;
    if params.n != cfg.n as u64 || params.d != cfg.d as u64 || params.l != cfg.l {
        return Err(Error::Config(format!(
            "bound params (n={}, d={}, L={}) do not match the estimate (n={}, d={}, L={})",
            params.n, params.d, params.l, cfg.n, cfg.d, cfg.l
        )));
    }
    let rows = est
        .t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let p = params.with_t(t);
            let b = bernstein_tail(&p);
            let m = main_tail(&p);
            ComparisonRow {
                t,
                count: est.counts[i],
                p_hat: est.p_hat[i],
                ci_low: est.ci_low[i],
                ci_high: est.ci_high[i],
                bernstein: b.value,
                bernstein_valid: b.valid,
                main: m.value,
                main_valid: m.valid,
                hw19: hw19_tail(&p).value,
                freedman: freedman_tail(&p).value,
            }
        })
        .collect();
    Ok(Comparison {
        trials: est.trials,
        params: *params,
        rows,
        admissible_c: admissible_c(est, params),
    })
}

impl Comparison {
    /// `t,count,trials,p_hat,ci_low,ci_high,bernstein,bernstein_valid,main,main_valid,hw19,freedman`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "t,count,trials,p_hat,ci_low,ci_high,bernstein,bernstein_valid,main,main_valid,hw19,freedman"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                fmt_f64(r.t),
                r.count,
                self.trials,
                fmt_f64(r.p_hat),
                fmt_f64(r.ci_low),
                fmt_f64(r.ci_high),
                fmt_f64(r.bernstein),
                fmt_bool(r.bernstein_valid),
                fmt_f64(r.main),
                fmt_bool(r.main_valid),
                fmt_f64(r.hw19),
                fmt_f64(r.freedman)
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_threshold_always_exceeded() {
        let dist = MatrixDistribution::hermitian_bounded_default(2, 1.0, 0.5).unwrap();
        let est = estimate_tail(&dist, 10, 50, &[0.0], 3).unwrap();
        assert_eq!(est.counts, vec![50]);
        assert_eq!(est.p_hat, vec![1.0]);
    }

    #[test]
    fn bad_grids_are_config_errors() {
        let dist = MatrixDistribution::two_point_scalar(1.0).unwrap();
        for grid in [
            vec![],
            vec![0.2, 0.1],
            vec![0.1, 0.1],
            vec![-1.0],
            vec![f64::NAN],
        ] {
            assert!(matches!(
                estimate_tail(&dist, 4, 10, &grid, 0),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn counts_nonincreasing_and_ci_ordered() {
        let dist = MatrixDistribution::ginibre_clipped(3, 1.0, None).unwrap();
        let grid: Vec<f64> = (0..20).map(|i| i as f64 * 0.02).collect();
        let est = estimate_tail(&dist, 30, 400, &grid, 9).unwrap();
        assert!(est.counts.windows(2).all(|w| w[1] <= w[0]));
        for i in 0..grid.len() {
            assert!(0.0 <= est.ci_low[i] && est.ci_low[i] <= est.p_hat[i]);
            assert!(est.p_hat[i] <= est.ci_high[i] && est.ci_high[i] <= 1.0);
        }
    }

    #[test]
    fn degenerate_distribution_never_exceeds() {
        // L = 0 makes every sample zero, so f = I = e^0.
        let dist = MatrixDistribution::diagonal_rademacher(3, 0.0).unwrap();
        let grid = [0.0, 1e-12, 0.1, 1.0];
        let est = estimate_tail(&dist, 20, 100, &grid, 1).unwrap();
        assert_eq!(est.counts, vec![100, 0, 0, 0]);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let dist = MatrixDistribution::hermitian_bounded_default(2, 1.0, 0.5).unwrap();
        let grid: Vec<f64> = (0..10).map(|i| i as f64 * 0.05).collect();
        let a = estimate_tail_with_workers(&dist, 20, 300, &grid, 5, 1).unwrap();
        let b = estimate_tail_with_workers(&dist, 20, 300, &grid, 5, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn compare_rejects_mismatched_params() {
        let dist = MatrixDistribution::hermitian_bounded_default(2, 1.0, 0.5).unwrap();
        let est = estimate_tail(&dist, 10, 20, &[0.0, 0.1], 0).unwrap();
        assert!(compare_bounds(&est, &BoundParams::new(11, 2, 1.0)).is_err());
        assert!(compare_bounds(&est, &BoundParams::new(10, 2, 1.0)).is_ok());
    }

    #[test]
    fn admissible_c_is_positive_and_finite() {
        let dist = MatrixDistribution::hermitian_bounded_default(4, 1.0, 0.5).unwrap();
        let top = 2.0 * std::f64::consts::E * (4f64.ln() / 50.0).sqrt();
        let grid: Vec<f64> = (0..26).map(|i| top * i as f64 / 25.0).collect();
        let est = estimate_tail(&dist, 50, 200, &grid, 4).unwrap();
        let cmp = compare_bounds(&est, &BoundParams::new(50, 4, 1.0)).unwrap();
        assert!(cmp.admissible_c > 0.0 && cmp.admissible_c.is_finite());
        let fitted = BoundParams::new(50, 4, 1.0).with_c(cmp.admissible_c);
        for row in cmp.rows.iter().filter(|r| r.main_valid && r.t > 0.0) {
            assert!(main_tail(&fitted.with_t(row.t)).value >= row.ci_high * (1.0 - 1e-12));
        }
    }
}
