//! `mnar`: partial identification of a risk difference under nonignorable
//! missingness.
//!
//! Exit codes: 0 on success, including falsified assumptions and exhausted
//! rejection budgets; 1 for I/O and configuration errors; 2 for usage errors.

mod analyze;
mod bounds;
mod config;
mod simulate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mnar_core::evidence::MIN_PRIOR_ATTEMPTS;
use mnar_core::interval::credible_intervals;
use mnar_core::io::{chain_csv, read_input};
use mnar_core::sim::{prior_ar_sweep, sweep_csv, ModelSpec, SweepPoint};
use mnar_core::{heckman_fit, prior_acceptance_rate, AssumptionKind, AssumptionSpec};
use serde_json::json;

use config::Config;

#[derive(Parser, Debug)]
#[command(name = "mnar", version, about = "Bayesian bounds for binary outcomes missing not at random")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Master seed; every random stream derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Accepted posterior draws per model (kept Gibbs sweeps for `heckman`).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(2..))]
    draws: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// INI configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the configured models to a counts or row-level CSV.
    Analyze {
        input: Option<PathBuf>,
        /// Credible levels, comma separated.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        /// `posterior` or a fixed P(Z=1).
        #[arg(long)]
        qz: Option<String>,
    },
    /// Run a replicated simulation study.
    Simulate {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        replicates: Option<u64>,
        /// Full-scale run with 200 replicates.
        #[arg(long)]
        full: bool,
    },
    /// Prior acceptance rates of the restricted samplers.
    PriorAr {
        #[arg(long, default_value_t = 200_000, value_parser = clap::value_parser!(u64).range(MIN_PRIOR_ATTEMPTS..))]
        attempts: u64,
        /// Sweep the missing-mass pseudo-count instead of using each spec's own.
        #[arg(long)]
        sweep: bool,
        /// Sweep grid, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
        grid: Vec<f64>,
    },
    /// Closed-form omega intervals and risk-difference bounds.
    Bounds {
        input: PathBuf,
        #[arg(long)]
        kind: Option<AssumptionKind>,
        #[arg(long, default_value_t = 2.0 / 3.0)]
        t_l: f64,
        #[arg(long, default_value_t = 1.5)]
        t_h: f64,
        /// P(Z=1); defaults to the sample share, or 0.5 for a q-table.
        #[arg(long)]
        qz: Option<f64>,
        /// Allowed deviation of q-table row sums from 1.
        #[arg(long, default_value_t = 1e-9)]
        sum_tol: f64,
    },
    /// Gibbs sampler for the Heckman selection model.
    Heckman {
        input: PathBuf,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
    },
}

/// A request that is malformed rather than failing: exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub struct Globals {
    seed: Option<u64>,
    draws: Option<usize>,
    out: PathBuf,
    out_explicit: Option<PathBuf>,
    config: Config,
    config_path: Option<PathBuf>,
}

impl Globals {
    /// Command line over config over default.
    fn seed_or(&self, from_config: Option<u64>, default: u64) -> u64 {
        self.seed.or(from_config).unwrap_or(default)
    }

    fn draws_or(&self, from_config: Option<usize>, default: usize) -> usize {
        self.draws.or(from_config).unwrap_or(default)
    }

    fn config_dir(&self) -> PathBuf {
        self.config_path
            .as_deref()
            .and_then(Path::parent)
            .map(Path::to_path_buf)
            .unwrap_or_default()
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Provenance record: everything needed to rerun, nothing that varies between runs.
fn manifest(g: &Globals, seed: u64, counts_csv: &str) -> Result<String> {
    let m = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config_sha256": g.config.sha256(),
        "counts": counts_csv,
    });
    Ok(serde_json::to_string_pretty(&m)? + "\n")
}

fn prior_ar(g: &Globals, attempts: u64, sweep: bool, grid: &[f64]) -> Result<()> {
    let named = g.config.models()?;
    let specs: Vec<AssumptionSpec> = if named.is_empty() {
        AssumptionSpec::restricted_defaults().to_vec()
    } else {
        named
            .into_iter()
            .filter_map(|m| match m.model {
                ModelSpec::Saturated(s) if s.kind != AssumptionKind::None => Some(s),
                _ => None,
            })
            .collect()
    };
    if specs.is_empty() {
        anyhow::bail!("no restricted models configured");
    }
    let seed = g.seed_or(g.config.parse("prior_ar", "seed")?, 1);
    let points = if sweep {
        if grid.is_empty() || grid.iter().any(|&a| !(a >= 1.0)) {
            anyhow::bail!(Usage(format!("sweep grid values must be at least 1, got {grid:?}")));
        }
        prior_ar_sweep(grid, &specs, attempts, seed)?
    } else {
        specs
            .iter()
            .map(|s| {
                let r = prior_acceptance_rate(s, attempts, seed)?;
                // Reported on the sweep's scale, where the default prior sits at 1.
                Ok(SweepPoint { spec: s.label(), alpha3: s.hyper.a3 - 1.0, ar: r.rate, se: r.se })
            })
            .collect::<mnar_core::Result<Vec<_>>>()?
    };
    let csv = sweep_csv(&points);
    write_file(&g.out, "prior_ar.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

fn heckman(g: &Globals, input: &Path, levels: Option<Vec<f64>>) -> Result<()> {
    let file = std::fs::File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let data = read_input(file).with_context(|| format!("reading {}", input.display()))?;
    let rows = match data {
        mnar_core::io::DataInput::Rows(r) => r,
        mnar_core::io::DataInput::Counts(c) => c.to_rows(),
    };
    let mut gibbs = g.config.gibbs()?;
    if let Some(d) = g.draws {
        gibbs.iterations = gibbs.burn_in + d;
    }
    let levels = levels.unwrap_or_else(|| analyze::DEFAULT_LEVELS.to_vec());
    let seed = g.seed_or(g.config.parse("heckman", "seed")?, 1);
    let fit = heckman_fit(&rows, &gibbs, seed)?;
    let intervals = credible_intervals(&fit.psi, &levels).map_err(|e| Usage(e.to_string()))?;
    let columns: [(&str, Vec<f64>); 6] = [
        ("gamma0", fit.params.iter().map(|p| p.gamma[0]).collect()),
        ("gamma1", fit.params.iter().map(|p| p.gamma[1]).collect()),
        ("gamma2", fit.params.iter().map(|p| p.gamma[2]).collect()),
        ("beta0", fit.params.iter().map(|p| p.beta[0]).collect()),
        ("beta1", fit.params.iter().map(|p| p.beta[1]).collect()),
        ("rho", fit.params.iter().map(|p| p.rho).collect()),
    ];
    let mut params = serde_json::Map::new();
    for (name, v) in &columns {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        params.insert(name.to_string(), json!({ "mean": mean, "sd": sd }));
    }
    let summary = json!({
        "seed": seed,
        "iterations": gibbs.iterations,
        "burn_in": gibbs.burn_in,
        "rho_acceptance": fit.rho_acceptance,
        "params": params,
        "psi": intervals,
    });
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    write_file(&g.out, "chain.csv", &chain_csv(&fit))?;
    write_file(&g.out, "heckman.json", &text)?;
    print!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let GlobalArgs { seed, draws, out, config } = cli.global;
    let g = Globals {
        seed,
        draws: draws.map(|d| d as usize),
        out: out.clone().unwrap_or_else(|| PathBuf::from("mnar-out")),
        out_explicit: out,
        config: Config::load(config.as_deref())?,
        config_path: config,
    };
    match cli.command {
        Command::Analyze { input, levels, qz } => {
            analyze::run(&g, analyze::AnalyzeArgs { input: input.as_deref(), levels, qz })
        }
        Command::Simulate { replicates, full } => simulate::run(&g, replicates.map(|r| r as usize), full),
        Command::PriorAr { attempts, sweep, grid } => prior_ar(&g, attempts, sweep, &grid),
        Command::Bounds { input, kind, t_l, t_h, qz, sum_tol } => {
            bounds::run(&g, bounds::BoundsArgs { input: &input, kind, t_l, t_h, qz, sum_tol })
        }
        Command::Heckman { input, levels } => heckman(&g, &input, levels),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
