use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use neq_bench::config::{load_config, ExperimentConfig};
use neq_bench::experiment::{run_experiment, tests_path};
use neq_bench::output::{read_tests, read_trace};
use neq_bench::summary::{trace_violations, SummaryStats, SweepSummary};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "neq-bench", about = "Run and summarize non-stationary equilibrium experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config, or just `--seed`.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to `run.out` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the config at several horizons and fit the regret slope.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated horizons such as `2^14,2^16,2^18` or `1000,4000`.
        #[arg(long = "T", value_delimiter = ',', value_parser = parse_horizon)]
        horizons: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute summaries from the traces in a directory and its subdirectories.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn parse_horizon(text: &str) -> Result<usize, String> {
    let text = text.trim();
    let value = match text.split_once('^') {
        Some((base, exp)) => {
            let base: usize = base.trim().parse().map_err(|e| format!("{text}: {e}"))?;
            let exp: u32 = exp.trim().parse().map_err(|e| format!("{text}: {e}"))?;
            base.checked_pow(exp).ok_or_else(|| format!("{text} overflows"))?
        }
        None => text.parse().map_err(|e| format!("{text}: {e}"))?,
    };
    if value == 0 {
        return Err("T must be at least 1".into());
    }
    Ok(value)
}

fn pool() -> anyhow::Result<rayon::ThreadPool> {
    let threads = match std::env::var("NEQ_BENCH_THREADS") {
        Ok(v) => v.trim().parse().with_context(|| format!("NEQ_BENCH_THREADS={v}"))?,
        Err(_) => 0,
    };
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build()?)
}

fn run_seeds(pool: &rayon::ThreadPool, cfg: &ExperimentConfig, seeds: &[u64], dir: &Path) -> anyhow::Result<Vec<SummaryStats>> {
    pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let s = run_experiment(cfg, seed, dir)?;
                log::info!(
                    "T={} seed {seed}: regret {:.3}, restarts {}, final-quarter gap {:.4}",
                    s.episodes,
                    s.cumulative_regret,
                    s.restarts,
                    s.final_quarter_gap
                );
                Ok(s)
            })
            .collect()
    })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Reads every `trace_seed{k}.csv` directly inside `dir`.
fn summarize_dir(dir: &Path) -> anyhow::Result<Vec<SummaryStats>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let Some(seed) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("trace_seed")?.strip_suffix(".csv")?.parse::<u64>().ok())
        else {
            continue;
        };
        let rows = read_trace(BufReader::new(File::open(&path)?)).with_context(|| format!("reading {}", path.display()))?;
        for v in trace_violations(&rows, 1e-8) {
            log::warn!("{}: {v}", path.display());
        }
        let tp = tests_path(dir, seed);
        let tests = if tp.exists() {
            read_tests(BufReader::new(File::open(&tp)?)).with_context(|| format!("reading {}", tp.display()))?
        } else {
            Vec::new()
        };
        out.push(SummaryStats::from_rows(seed, &rows, &tests));
    }
    out.sort_by_key(|s| s.seed);
    Ok(out)
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, out } => {
            let cfg = load_config(&config)?;
            let dir = out.unwrap_or_else(|| cfg.run.out.clone());
            let seeds = seed.map_or_else(|| cfg.run.seeds.clone(), |s| vec![s]);
            let summaries = run_seeds(&pool()?, &cfg, &seeds, &dir)?;
            println!("{}", serde_json::to_string_pretty(&summaries)?);
        }
        Command::Sweep { config, horizons, out } => {
            if horizons.is_empty() {
                bail!("--T needs at least one horizon");
            }
            let cfg = load_config(&config)?;
            let dir = out.unwrap_or_else(|| cfg.run.out.clone());
            let pool = pool()?;
            let mut runs = Vec::new();
            for &t in &horizons {
                let mut at = cfg.clone();
                at.run.horizon = t;
                at.validate()?;
                runs.push(run_seeds(&pool, &at, &cfg.run.seeds, &dir.join(format!("T{t}")))?);
            }
            let sweep = SweepSummary::new(horizons, &runs);
            write_json(&dir.join("sweep.json"), &sweep)?;
            println!("{}", serde_json::to_string_pretty(&sweep)?);
        }
        Command::Summarize { input } => {
            let mut groups: BTreeMap<usize, Vec<SummaryStats>> = BTreeMap::new();
            let mut dirs = vec![input.clone()];
            for entry in std::fs::read_dir(&input).with_context(|| format!("listing {}", input.display()))? {
                let path = entry?.path();
                if path.is_dir() {
                    dirs.push(path);
                }
            }
            for dir in dirs {
                let stats = summarize_dir(&dir)?;
                if let Some(first) = stats.first() {
                    if stats.iter().any(|s| s.episodes != first.episodes) {
                        bail!("{} mixes traces of different lengths", dir.display());
                    }
                    groups.entry(first.episodes).or_default().extend(stats);
                }
            }
            if groups.is_empty() {
                bail!("no trace_seed*.csv files under {}", input.display());
            }
            let seeds: Vec<Vec<u64>> = groups.values().map(|g| g.iter().map(|s| s.seed).collect()).collect();
            if groups.len() >= 3 && seeds.windows(2).all(|w| w[0] == w[1]) {
                let horizons = groups.keys().copied().collect();
                let runs: Vec<Vec<SummaryStats>> = groups.into_values().collect();
                println!("{}", serde_json::to_string_pretty(&SweepSummary::new(horizons, &runs))?);
            } else {
                println!("{}", serde_json::to_string_pretty(&groups)?);
            }
        }
    }
    Ok(())
}
