use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use matconc::config::{run, Command, ExperimentConfig, RunOutcome};
use matconc::distributions::{DistributionConfig, DistributionKind, DistributionParams};
use matconc::{Error, Result};

/// Concentration experiments for normalized random matrix products.
#[derive(Parser, Debug)]
#[command(name = "matconc", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Cmd>,

    /// Rerun a saved config or manifest instead of a subcommand.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Cap on worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Write the CSV here and a manifest next to it; CSV goes to stdout otherwise.
    #[arg(long, short, global = true, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Monte Carlo tail of ‖f − e^μ‖ next to every closed-form bound.
    Simulate {
        #[command(flatten)]
        dist: DistFlags,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        trials: Option<u64>,
        #[command(flatten)]
        seed: SeedFlag,
        /// `start:stop:step` or a comma list; defaults to 26 points.
        #[arg(long, value_parser = parse_f64_grid)]
        t_grid: Option<FGrid>,
        #[command(flatten)]
        constants: BoundFlags,
    },
    /// Closed-form bounds over a t-grid or an n-grid.
    Bounds {
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        d: u64,
        #[arg(long = "L")]
        l: f64,
        #[arg(long, value_parser = parse_f64_grid, conflicts_with = "n_grid")]
        t_grid: Option<FGrid>,
        #[arg(long, value_parser = parse_u64_grid, requires = "t")]
        n_grid: Option<UGrid>,
        /// Fixed t for an n-grid.
        #[arg(long)]
        t: Option<f64>,
        #[command(flatten)]
        constants: BoundFlags,
    },
    /// Certifies the increment and variation bounds on random traces.
    MartingaleCheck {
        #[command(flatten)]
        dist: DistFlags,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        trials: Option<u64>,
        #[command(flatten)]
        seed: SeedFlag,
    },
    /// Scalar two-point construction against its exact binomial tails.
    LowerBound {
        #[arg(long = "L", value_parser = parse_f64_grid)]
        l_values: Option<FGrid>,
        #[arg(long = "c", value_parser = parse_f64_grid)]
        c_values: Option<FGrid>,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        #[command(flatten)]
        seed: SeedFlag,
    },
    /// Brute-force enumeration checks of the martingale closed forms.
    OracleCheck {
        #[arg(long, requires = "l")]
        kind: Option<DistributionKind>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long = "L")]
        l: Option<f64>,
        /// Largest n checked; every n from 1 up is enumerated.
        #[arg(long)]
        n: Option<u64>,
    },
}

#[derive(Args, Debug)]
struct SeedFlag {
    #[arg(long, env = "MATCONC_SEED")]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct DistFlags {
    #[arg(long)]
    kind: DistributionKind,
    /// Dimension; defaults to 1.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "L")]
    l: f64,
    #[arg(long)]
    center_scale: Option<f64>,
    #[arg(long)]
    entry_std: Option<f64>,
    /// JSON matrix `{"d", "re", "im"}` used as the HermitianBounded center.
    #[arg(long)]
    mean_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundFlags {
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    hw_constant: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "R")]
    r: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
}

impl DistFlags {
    fn into_config(self) -> DistributionConfig {
        DistributionConfig {
            kind: self.kind,
            d: self.d.unwrap_or(1),
            l: self.l,
            params: DistributionParams {
                center_scale: self.center_scale,
                entry_std: self.entry_std,
            },
            mean_file: self.mean_file.map(absolute),
        }
    }
}

impl BoundFlags {
    fn apply(self, cfg: &mut ExperimentConfig) {
        cfg.c = self.c;
        cfg.hw_constant = self.hw_constant;
        cfg.delta = self.delta;
        cfg.r = self.r;
        cfg.sigma2 = self.sigma2;
    }
}

fn absolute(p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        std::env::current_dir().map(|cwd| cwd.join(&p)).unwrap_or(p)
    }
}

/// A parsed grid; a newtype so clap treats it as one value.
#[derive(Clone, Debug)]
struct FGrid(Vec<f64>);

#[derive(Clone, Debug)]
struct UGrid(Vec<u64>);

/// Number of grid steps in `[start, stop]`, endpoints included within half a step.
fn grid_steps(start: f64, stop: f64, step: f64) -> std::result::Result<u64, String> {
    if !(step > 0.0 && step.is_finite() && start.is_finite() && stop.is_finite()) {
        return Err("grid needs finite bounds and a positive step".into());
    }
    if stop < start {
        return Err("grid stop is below start".into());
    }
    let steps = ((stop - start) / step + 0.5).floor();
    if steps > 1e7 {
        return Err("grid has too many points".into());
    }
    Ok(steps as u64)
}

fn parse_f64_grid(s: &str) -> std::result::Result<FGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| {
        p.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad number '{p}': {e}"))
    };
    match parts.len() {
        1 => s
            .split(',')
            .map(num)
            .collect::<std::result::Result<_, _>>()
            .map(FGrid),
        3 => {
            let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            let steps = grid_steps(start, stop, step)?;
            Ok(FGrid(
                (0..=steps).map(|i| start + i as f64 * step).collect(),
            ))
        }
        _ => Err(format!(
            "grid '{s}' is neither start:stop:step nor a comma list"
        )),
    }
}

fn parse_u64_grid(s: &str) -> std::result::Result<UGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| {
        p.trim()
            .parse::<u64>()
            .map_err(|e| format!("bad integer '{p}': {e}"))
    };
    match parts.len() {
        1 => s
            .split(',')
            .map(num)
            .collect::<std::result::Result<_, _>>()
            .map(UGrid),
        3 => {
            let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if step == 0 || stop < start {
                return Err("grid needs a positive step and stop ≥ start".into());
            }
            Ok(UGrid((start..=stop).step_by(step as usize).collect()))
        }
        _ => Err(format!(
            "grid '{s}' is neither start:stop:step nor a comma list"
        )),
    }
}

fn build_config(cmd: Cmd) -> ExperimentConfig {
    match cmd {
        Cmd::Simulate {
            dist,
            n,
            trials,
            seed,
            t_grid,
            constants,
        } => {
            let mut cfg = ExperimentConfig::new(Command::Simulate);
            cfg.distribution = Some(dist.into_config());
            cfg.n = Some(n);
            cfg.trials = trials;
            cfg.seed = seed.seed;
            cfg.t_grid = t_grid.map(|g| g.0);
            constants.apply(&mut cfg);
            cfg
        }
        Cmd::Bounds {
            n,
            d,
            l,
            t_grid,
            n_grid,
            t,
            constants,
        } => {
            let mut cfg = ExperimentConfig::new(Command::Bounds);
            cfg.n = n;
            cfg.d = Some(d);
            cfg.l = Some(l);
            cfg.t_grid = t_grid.map(|g| g.0);
            cfg.n_grid = n_grid.map(|g| g.0);
            cfg.t = t;
            constants.apply(&mut cfg);
            cfg
        }
        Cmd::MartingaleCheck {
            dist,
            n,
            trials,
            seed,
        } => {
            let mut cfg = ExperimentConfig::new(Command::MartingaleCheck);
            cfg.distribution = Some(dist.into_config());
            cfg.n = Some(n);
            cfg.trials = trials;
            cfg.seed = seed.seed;
            cfg
        }
        Cmd::LowerBound {
            l_values,
            c_values,
            n,
            trials,
            seed,
        } => {
            let mut cfg = ExperimentConfig::new(Command::LowerBound);
            cfg.l_values = l_values.map(|g| g.0);
            cfg.c_values = c_values.map(|g| g.0);
            cfg.n = n;
            cfg.trials = trials;
            cfg.seed = seed.seed;
            cfg
        }
        Cmd::OracleCheck { kind, d, l, n } => {
            let mut cfg = ExperimentConfig::new(Command::OracleCheck);
            if let (Some(kind), Some(l)) = (kind, l) {
                cfg.distribution = Some(DistributionConfig::new(kind, d.unwrap_or(1), l));
            }
            cfg.n = n;
            cfg
        }
    }
}

fn error_record(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": kind, "message": message }));
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Hypothesis(_) => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn execute(cli: Cli) -> Result<RunOutcome> {
    let mut cfg = match (cli.command, &cli.config) {
        (Some(cmd), None) => build_config(cmd),
        (None, Some(path)) => ExperimentConfig::load(path)?,
        (None, None) => return Err(Error::Config("give a subcommand or --config".into())),
        (Some(_), Some(_)) => unreachable!("clap rejects --config with a subcommand"),
    };
    if cli.output.is_some() {
        cfg.output = cli.output.map(absolute);
    }
    match cli.workers {
        Some(0) => Err(Error::Config("--workers must be positive".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
            .install(|| run(&cfg)),
        None => run(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            error_record("usage", e.to_string().trim());
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(outcome) => {
            if outcome.config.output.is_some() {
                println!("{}", outcome.summary);
            } else {
                print!("{}", outcome.csv);
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                error_record(
                    "check-failed",
                    &format!("{} found violations", outcome.config.command_name()),
                );
                ExitCode::from(1)
            }
        }
        Err(err) => {
            error_record(err.kind(), &err.to_string());
            ExitCode::from(exit_code(&err))
        }
    }
}
