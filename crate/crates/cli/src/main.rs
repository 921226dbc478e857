mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};

use config::MetricConfig;

#[derive(Parser)]
#[command(
    name = "ktorus",
    version,
    about = "Killing tensor obstructions on conformally flat 2-tori"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Per-rank obstruction report (JSON).
    Analyze {
        config: PathBuf,
        /// Comma-separated ranks.
        #[arg(long, default_value = "1,2,3,4")]
        ranks: String,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed geodesic of a homotopy class and its ray integrals.
    Geodesics {
        config: PathBuf,
        /// Homotopy class `p,q`.
        #[arg(long, allow_hyphen_values = true)]
        class: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-form kernel fields of rank m on the grid and the SVD check.
    Kernel {
        config: PathBuf,
        #[arg(long)]
        rank: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Isolines of the curvature and their line integrals.
    Isolines {
        config: PathBuf,
        /// Comma-separated curvature levels; seven interior levels when omitted.
        #[arg(long, allow_hyphen_values = true)]
        levels: Option<String>,
        /// Weight-3 pseudovector `c1,c2`.
        #[arg(long, default_value = "1,0", allow_hyphen_values = true)]
        c: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Lambda grids from both routes and their mean values.
    Lambda {
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_list<T: FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| anyhow!("{flag}: cannot parse `{t}` in `{s}`"))
        })
        .collect()
}

fn parse_pair<T: FromStr + Copy>(flag: &str, s: &str) -> Result<[T; 2]> {
    match parse_list::<T>(flag, s)?.as_slice() {
        &[a, b] => Ok([a, b]),
        _ => Err(anyhow!("{flag}: expected two comma-separated values, got `{s}`")),
    }
}

fn load(path: &Path) -> Result<config::Metric> {
    MetricConfig::load(path)?
        .build()
        .with_context(|| format!("invalid config {}", path.display()))
}

fn set_threads() -> Result<()> {
    if let Ok(v) = std::env::var("KT_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow!("KT_THREADS: expected a positive integer, got `{v}`"))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    set_threads()?;
    match cli.cmd {
        Cmd::Analyze { config, ranks, out } => {
            let ranks = parse_list::<usize>("--ranks", &ranks)?;
            let metric = load(&config)?;
            let id = config.file_stem().and_then(|s| s.to_str()).unwrap_or("metric");
            commands::analyze(&metric, id, &ranks, out.as_deref())
        }
        Cmd::Geodesics { config, class, out } => {
            let [p, q] = parse_pair::<i64>("--class", &class)?;
            commands::geodesics(&load(&config)?, (p, q), &out)
        }
        Cmd::Kernel { config, rank, out } => commands::kernel(&load(&config)?, rank, &out),
        Cmd::Isolines { config, levels, c, out } => {
            let levels = match levels {
                Some(s) => parse_list::<f64>("--levels", &s)?,
                None => Vec::new(),
            };
            let c = parse_pair::<f64>("--c", &c)?;
            commands::isolines(&load(&config)?, &levels, c, &out)
        }
        Cmd::Lambda { config, out } => commands::lambda(&load(&config)?, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
