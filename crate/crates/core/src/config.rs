//! Experiment configuration and the batch runner behind the CLI.
//!
//! A config is resolved (every default filled in) before it runs, and the
//! resolved form is what lands in the manifest, so rerunning a manifest
//! reproduces its CSV exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bounds::{
    bernstein_tail, freedman_tail, hw19_tail, main_tail, BoundParams, DEFAULT_C,
    DEFAULT_HW_CONSTANT,
};
use crate::distributions::{DistributionConfig, MatrixDistribution};
use crate::error::{Error, Result};
use crate::martingale::{certify_bounds, decompose, decompose_with_variation, MartingaleTrace};
use crate::montecarlo::lowerbound::write_lower_bound_csv;
use crate::montecarlo::{
    compare_bounds, default_t_grid, estimate_tail, lower_bound_experiment, DEFAULT_C_VALUES,
    DEFAULT_L_VALUES,
};
use crate::oracle;
use crate::output::{fmt_bool, fmt_f64};
use crate::products::ProductInstance;
use crate::rng::RandomStream;

pub const DEFAULT_TRIALS: u64 = 10_000;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_LOWER_BOUND_N: u64 = 100;
pub const DEFAULT_MARTINGALE_TRIALS: u64 = 100;
pub const DEFAULT_ORACLE_MAX_N: u64 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Bounds,
    MartingaleCheck,
    LowerBound,
    OracleCheck,
}

/// Flat configuration shared by every command. Fields a command does not use
/// must be absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u64>,
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<u64>>,
    /// Fixed `t` for an `n`-grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, rename = "L_values", skip_serializing_if = "Option::is_none")]
    pub l_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hw_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// What a run produced, before anything touches the filesystem.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub config: ExperimentConfig,
    pub csv: String,
    pub summary: serde_json::Value,
    /// False when a check command found a violation.
    pub passed: bool,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        ExperimentConfig {
            command,
            distribution: None,
            n: None,
            d: None,
            l: None,
            trials: None,
            seed: None,
            t_grid: None,
            n_grid: None,
            t: None,
            l_values: None,
            c_values: None,
            c: None,
            hw_constant: None,
            delta: None,
            r: None,
            sigma2: None,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Loads a config or a manifest (`{"config": …, "summary": …}`).
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let body = match value.get("config") {
            Some(inner) if value.get("summary").is_some() => inner.clone(),
            _ => value,
        };
        Ok(serde_json::from_value(body)?)
    }

    fn reject_unused(&self, allowed: &[&str]) -> Result<()> {
        let present = [
            ("distribution", self.distribution.is_some()),
            ("n", self.n.is_some()),
            ("d", self.d.is_some()),
            ("L", self.l.is_some()),
            ("trials", self.trials.is_some()),
            ("seed", self.seed.is_some()),
            ("t_grid", self.t_grid.is_some()),
            ("n_grid", self.n_grid.is_some()),
            ("t", self.t.is_some()),
            ("L_values", self.l_values.is_some()),
            ("c_values", self.c_values.is_some()),
            ("c", self.c.is_some()),
            ("hw_constant", self.hw_constant.is_some()),
            ("delta", self.delta.is_some()),
            ("R", self.r.is_some()),
            ("sigma2", self.sigma2.is_some()),
        ];
        for (name, set) in present {
            if set && !allowed.contains(&name) {
                return Err(Error::Config(format!(
                    "'{name}' does not apply to {}",
                    self.command_name()
                )));
            }
        }
        Ok(())
    }

    pub fn command_name(&self) -> &'static str {
        match self.command {
            Command::Simulate => "simulate",
            Command::Bounds => "bounds",
            Command::MartingaleCheck => "martingale-check",
            Command::LowerBound => "lower-bound",
            Command::OracleCheck => "oracle-check",
        }
    }

    fn require_distribution(&self) -> Result<&DistributionConfig> {
        self.distribution
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{} needs a distribution", self.command_name())))
    }

    fn require_n(&self) -> Result<u64> {
        match self.n {
            Some(0) => Err(Error::Config("n must be positive".into())),
            Some(n) => Ok(n),
            None => Err(Error::Config(format!("{} needs n", self.command_name()))),
        }
    }

    /// Checks the fields against the command and fills in every default.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut r = self.clone();
        match self.command {
            Command::Simulate => {
                self.reject_unused(&[
                    "distribution",
                    "n",
                    "trials",
                    "seed",
                    "t_grid",
                    "c",
                    "hw_constant",
                    "delta",
                    "R",
                    "sigma2",
                ])?;
                let dist = self.require_distribution()?.build()?;
                let n = self.require_n()?;
                r.trials.get_or_insert(DEFAULT_TRIALS);
                r.seed.get_or_insert(DEFAULT_SEED);
                r.c.get_or_insert(DEFAULT_C);
                r.hw_constant.get_or_insert(DEFAULT_HW_CONSTANT);
                r.delta.get_or_insert(DEFAULT_DELTA);
                let (big_r, s2) = freedman_defaults(dist.norm_bound(), n);
                r.r.get_or_insert(big_r);
                r.sigma2.get_or_insert(s2);
                if r.t_grid.is_none() {
                    r.t_grid = Some(default_t_grid(dist.norm_bound(), dist.dim(), n as usize));
                }
            }
            Command::Bounds => {
                self.reject_unused(&[
                    "n",
                    "d",
                    "L",
                    "t_grid",
                    "n_grid",
                    "t",
                    "c",
                    "hw_constant",
                    "delta",
                    "R",
                    "sigma2",
                ])?;
                let (d, l) = match (self.d, self.l) {
                    (Some(d), Some(l)) => (d, l),
                    _ => return Err(Error::Config("bounds needs d and L".into())),
                };
                match (&self.t_grid, &self.n_grid) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(
                            "give either t_grid or n_grid, not both".into(),
                        ))
                    }
                    (None, Some(grid)) => {
                        if self.n.is_some() {
                            return Err(Error::Config("n and n_grid are exclusive".into()));
                        }
                        if self.t.is_none() {
                            return Err(Error::Config("an n-grid needs a fixed t".into()));
                        }
                        if grid.is_empty() || grid.contains(&0) {
                            return Err(Error::Config(
                                "n grid must be nonempty and positive".into(),
                            ));
                        }
                    }
                    (t_grid, None) => {
                        if self.t.is_some() {
                            return Err(Error::Config("t applies only to an n-grid".into()));
                        }
                        let n = self.require_n()?;
                        if t_grid.is_none() {
                            r.t_grid = Some(default_t_grid(l, d as usize, n as usize));
                        }
                    }
                }
                r.c.get_or_insert(DEFAULT_C);
                r.hw_constant.get_or_insert(DEFAULT_HW_CONSTANT);
                r.delta.get_or_insert(DEFAULT_DELTA);
            }
            Command::MartingaleCheck => {
                self.reject_unused(&["distribution", "n", "trials", "seed"])?;
                self.require_distribution()?.build()?;
                self.require_n()?;
                r.trials.get_or_insert(DEFAULT_MARTINGALE_TRIALS);
                r.seed.get_or_insert(DEFAULT_SEED);
            }
            Command::LowerBound => {
                self.reject_unused(&["n", "trials", "seed", "L_values", "c_values"])?;
                r.n.get_or_insert(DEFAULT_LOWER_BOUND_N);
                r.trials.get_or_insert(DEFAULT_TRIALS);
                r.seed.get_or_insert(DEFAULT_SEED);
                r.l_values.get_or_insert_with(|| DEFAULT_L_VALUES.to_vec());
                r.c_values.get_or_insert_with(|| DEFAULT_C_VALUES.to_vec());
            }
            Command::OracleCheck => {
                self.reject_unused(&["distribution", "n"])?;
                r.n.get_or_insert(DEFAULT_ORACLE_MAX_N);
                if let Some(dc) = &self.distribution {
                    if !dc.kind.is_finitely_supported() {
                        return Err(Error::Unsupported(format!(
                            "oracle-check needs a finitely supported distribution, got {}",
                            dc.kind
                        )));
                    }
                }
            }
        }
        if r.trials == Some(0) {
            return Err(Error::Config("trials must be positive".into()));
        }
        Ok(r)
    }

    fn bound_params(&self, n: u64, d: u64, l: f64) -> BoundParams {
        let (big_r, s2) = freedman_defaults(l, n);
        BoundParams::new(n, d, l)
            .with_c(self.c.unwrap_or(DEFAULT_C))
            .with_hw_constant(self.hw_constant.unwrap_or(DEFAULT_HW_CONSTANT))
            .with_delta(self.delta.unwrap_or(DEFAULT_DELTA))
            .with_freedman(self.r.unwrap_or(big_r), self.sigma2.unwrap_or(s2))
    }
}

/// `R = 2L·e^L/n` and `σ² = 4L²e^(2L)/n`, the certified martingale constants.
pub fn freedman_defaults(l: f64, n: u64) -> (f64, f64) {
    let scale = 2.0 * l * l.exp();
    (scale / n as f64, scale * scale / n as f64)
}

/// Resolves and runs a config on the current rayon pool.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutcome> {
    let cfg = config.resolve()?;
    let (csv, summary, passed) = match cfg.command {
        Command::Simulate => run_simulate(&cfg)?,
        Command::Bounds => run_bounds(&cfg)?,
        Command::MartingaleCheck => run_martingale_check(&cfg)?,
        Command::LowerBound => run_lower_bound(&cfg)?,
        Command::OracleCheck => run_oracle_check(&cfg)?,
    };
    Ok(RunOutcome {
        config: cfg,
        csv,
        summary,
        passed,
    })
}

/// `<stem>.manifest.json` next to `csv_path`.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.manifest.json"))
}

/// Executes the config and writes the CSV and its manifest when an output
/// path is set.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    let outcome = execute(config)?;
    if let Some(path) = &outcome.config.output {
        fs::write(path, &outcome.csv)?;
        let manifest = json!({ "config": outcome.config, "summary": outcome.summary });
        fs::write(
            manifest_path(path),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
    }
    Ok(outcome)
}

fn run_simulate(cfg: &ExperimentConfig) -> Result<(String, serde_json::Value, bool)> {
    let dist = cfg.require_distribution()?.build()?;
    let n = cfg.require_n()?;
    let grid = cfg.t_grid.as_deref().unwrap_or_default();
    let est = estimate_tail(
        &dist,
        n as usize,
        cfg.trials.unwrap(),
        grid,
        cfg.seed.unwrap(),
    )?;
    let params = cfg.bound_params(n, dist.dim() as u64, dist.norm_bound());
    let cmp = compare_bounds(&est, &params)?;
    let mut csv = Vec::new();
    cmp.write_csv(&mut csv)?;
    let summary = json!({
        "admissible_c": finite_or_null(cmp.admissible_c),
        "trials": est.trials,
        "norm_bound": dist.norm_bound(),
    });
    Ok((into_string(csv), summary, true))
}

fn run_bounds(cfg: &ExperimentConfig) -> Result<(String, serde_json::Value, bool)> {
    let (d, l) = (cfg.d.unwrap(), cfg.l.unwrap());
    let row = |head: String, p: &BoundParams| -> Result<String> {
        p.validate()?;
        let b = bernstein_tail(p);
        let m = main_tail(p);
        Ok(format!(
            "{head},{},{},{},{},{},{}\n",
            fmt_f64(b.value),
            fmt_bool(b.valid),
            fmt_f64(m.value),
            fmt_bool(m.valid),
            fmt_f64(hw19_tail(p).value),
            fmt_f64(freedman_tail(p).value)
        ))
    };
    const COLUMNS: &str = "bernstein,bernstein_valid,main,main_valid,hw19,freedman";
    let mut rows = Vec::new();
    let csv_head = if let Some(grid) = &cfg.n_grid {
        let t = cfg.t.unwrap();
        for &n in grid {
            rows.push(row(n.to_string(), &cfg.bound_params(n, d, l).with_t(t))?);
        }
        format!("n,{COLUMNS}\n")
    } else {
        let n = cfg.n.unwrap();
        let grid = cfg.t_grid.as_deref().unwrap_or_default();
        check_ascending(grid)?;
        for &t in grid {
            rows.push(row(fmt_f64(t), &cfg.bound_params(n, d, l).with_t(t))?);
        }
        format!("t,{COLUMNS}\n")
    };
    let summary = json!({ "rows": rows.len() });
    Ok((csv_head + &rows.concat(), summary, true))
}

fn check_ascending(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Config(
            "t grid must be nonempty, finite and nonnegative".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("t grid must be strictly ascending".into()));
    }
    Ok(())
}

fn trace_for(
    dist: &MatrixDistribution,
    n: usize,
    seed: u64,
    trial: u64,
) -> Result<MartingaleTrace> {
    let mut stream = RandomStream::new(seed, trial);
    let samples = (0..n).map(|_| dist.sample(&mut stream)).collect();
    let inst = ProductInstance::new(samples)?;
    if dist.kind().is_finitely_supported() && dist.dim() <= 8 {
        decompose_with_variation(&inst, dist)
    } else {
        decompose(&inst, &dist.mean(), dist.norm_bound())
    }
}

fn run_martingale_check(cfg: &ExperimentConfig) -> Result<(String, serde_json::Value, bool)> {
    use rayon::prelude::*;

    let dist = cfg.require_distribution()?.build()?;
    let n = cfg.require_n()? as usize;
    let (trials, seed) = (cfg.trials.unwrap(), cfg.seed.unwrap());
    // (violations, worst slack ratio, worst trial), reduced deterministically.
    let (violations, worst_ratio, worst_trial) = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let report = certify_bounds(&trace_for(&dist, n, seed, trial)?);
            let v = report.increment_violations
                + report.chain_violations
                + report.variation.as_ref().map_or(0, |v| v.violations);
            let ratio = if report.r_bound > 0.0 {
                report.max_increment_norm / report.r_bound
            } else {
                0.0
            };
            Ok::<_, Error>((v, ratio, trial))
        })
        .try_reduce(
            || (0, f64::NEG_INFINITY, u64::MAX),
            |a, b| {
                let worse = if b.1 > a.1 || (b.1 == a.1 && b.2 < a.2) {
                    b
                } else {
                    a
                };
                Ok((a.0 + b.0, worse.1, worse.2))
            },
        )?;
    let worst = trace_for(&dist, n, seed, worst_trial)?;
    let mut csv = Vec::new();
    worst.write_csv(&mut csv)?;
    let summary = json!({
        "violations": violations,
        "worst_trial": worst_trial,
        "max_increment_ratio": worst_ratio,
        "variation_checked": worst.variation.is_some(),
    });
    Ok((into_string(csv), summary, violations == 0))
}

fn run_lower_bound(cfg: &ExperimentConfig) -> Result<(String, serde_json::Value, bool)> {
    let l_values = cfg.l_values.as_deref().unwrap_or_default();
    let reports = cfg
        .c_values
        .as_deref()
        .unwrap_or_default()
        .iter()
        .map(|&c| {
            lower_bound_experiment(
                l_values,
                c,
                cfg.n.unwrap(),
                cfg.trials.unwrap(),
                cfg.seed.unwrap(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    if reports.is_empty() {
        return Err(Error::Config("c_values is empty".into()));
    }
    let mut csv = Vec::new();
    write_lower_bound_csv(&reports, &mut csv)?;
    let rows: Vec<_> = reports.iter().flat_map(|r| r.rows()).collect();
    Ok((into_string(csv), json!({ "rows": rows }), true))
}

fn run_oracle_check(cfg: &ExperimentConfig) -> Result<(String, serde_json::Value, bool)> {
    let dists = match &cfg.distribution {
        Some(dc) => vec![dc.build()?],
        None => vec![
            MatrixDistribution::two_point_scalar(1.0)?,
            MatrixDistribution::diagonal_rademacher(1, 1.0)?,
            MatrixDistribution::diagonal_rademacher(2, 0.5)?,
        ],
    };
    let results = oracle::run_all(&dists, cfg.n.unwrap() as usize)?;
    let failures = results.iter().filter(|r| !r.passed).count();
    let mut csv = Vec::new();
    oracle::write_oracle_csv(&results, &mut csv)?;
    Ok((
        into_string(csv),
        json!({ "checks": results.len(), "failures": failures }),
        failures == 0,
    ))
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

fn into_string(bytes: Vec<u8>) -> String {
    String::from_utf8(bytes).expect("CSV writers emit UTF-8")
}
