use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use spillover::config::RunConfig;
use spillover::its::Granularity;
use spillover::pipeline::{Pipeline, Stage};

/// Measures how hateful language spreads from a fringe subreddit to the
/// rest of its members' activity.
#[derive(Parser, Debug)]
#[command(name = "spillover", version)]
struct Cli {
    /// Run configuration (TOML). Without it every default applies.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overriding `run.out`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for sampling and matching, overriding `run.seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (0 = all cores), overriding `run.threads`.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// ITS row granularity, overriding `its.granularity`.
    #[arg(long, global = true, value_enum)]
    granularity: Option<Granularity>,
    #[command(subcommand)]
    stage: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate the synthetic cohort described by `[synth]`.
    Synth,
    /// Parse post dumps into the corpus store.
    Ingest,
    /// Fit SAGE, export candidates and apply ratings.
    Lexicon,
    /// Select treatments, control subreddits and the control pool.
    Cohort,
    /// Pair treatments with controls by Mahalanobis distance.
    Match,
    /// Cross-validate the bandwidth and fit the ITS model.
    Its,
    /// Refit the ITS model over every bandwidth.
    Sensitivity,
    /// Context series, lifespan split and word-rank correlation.
    Analyze,
    /// Every stage in order (synth first when configured).
    All,
}

impl From<Command> for Stage {
    fn from(c: Command) -> Stage {
        match c {
            Command::Synth => Stage::Synth,
            Command::Ingest => Stage::Ingest,
            Command::Lexicon => Stage::Lexicon,
            Command::Cohort => Stage::Cohort,
            Command::Match => Stage::Match,
            Command::Its => Stage::Its,
            Command::Sensitivity => Stage::Sensitivity,
            Command::Analyze => Stage::Analyze,
            Command::All => Stage::All,
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load_with_out(path, cli.out.as_deref())
            .with_context(|| format!("loading {}", path.display()))?,
        None => {
            let mut cfg = RunConfig::default();
            if let Some(out) = &cli.out {
                cfg.run.out = out.clone();
            }
            cfg
        }
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.run.threads = threads;
    }
    if let Some(g) = cli.granularity {
        cfg.its.granularity = g;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.threads)
        .build_global()
        .context("starting the worker pool")?;
    let stage = Stage::from(cli.stage);
    let pipeline = Pipeline::new(cfg)?;
    pipeline
        .run(stage)
        .with_context(|| format!("stage `{}` failed", stage.name()))
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
