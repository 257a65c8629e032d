//! `gensel`: genre-driven training-data selection pipeline.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::{Run, SignificanceArgs};
use config::{config_error, ConfigError, Prerequisite, RunConfig};
use gensel::cluster::Method;
use gensel::{ErrorKind, Strategy};

#[derive(Parser)]
#[command(
    name = "gensel",
    version,
    about = "Genre-driven training-data selection over UD treebanks"
)]
struct Cli {
    #[command(flatten)]
    global: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Settings that override the config file.
#[derive(Args)]
struct Overrides {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory of treebank folders (default: $GENSEL_CORPUS_ROOT).
    #[arg(long, global = true)]
    corpus_root: Option<PathBuf>,
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    /// GSEM file or `fallback`.
    #[arg(long, global = true)]
    embeddings: Option<String>,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    targets: Option<Vec<String>>,
    #[arg(long, global = true, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
    #[arg(long, global = true)]
    subsample_cap: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Per-genre sentence bounds implied by treebank metadata.
    AnalyzeGenres {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes hashed character n-gram embeddings for the corpus.
    FeaturizeFallback {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Clusters every treebank into one cluster per metadata genre.
    Cluster {
        /// `gmm` or `lda`.
        #[arg(long)]
        method: String,
    },
    /// Labels sentences with genres by weakly supervised self-training.
    Bootstrap,
    /// Writes selection manifests and train/dev CoNLL-U files.
    Select {
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        target: Option<String>,
    },
    /// LAS/UAS over seeds with significance against baselines.
    Eval {
        /// `TARGET=gold.conllu`, repeatable.
        #[arg(long, required = true)]
        gold: Vec<String>,
        /// `NAME=DIR` with predictions at DIR/TARGET/seed-N.conllu, repeatable.
        #[arg(long, required = true)]
        system: Vec<String>,
        #[arg(long)]
        baseline: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired bootstrap sign test that B beats A.
    Significance {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        resamples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        comparisons: usize,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Compares two manifests.
    ManifestDiff { a: PathBuf, b: PathBuf },
}

fn effective_config(o: Overrides) -> Result<RunConfig> {
    let mut cfg = match &o.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = o.corpus_root {
        cfg.corpus_root = Some(v);
    }
    if let Some(v) = o.registry {
        cfg.registry = Some(v);
    }
    if let Some(v) = o.embeddings {
        cfg.embeddings = Some(v);
    }
    if let Some(v) = o.output {
        cfg.output = v;
    }
    if let Some(v) = o.seeds {
        cfg.seeds = v;
    }
    if let Some(v) = o.targets {
        cfg.targets = v.into_iter().map(config::TargetEntry::Builtin).collect();
    }
    if let Some(v) = o.strategies {
        cfg.strategies = v;
    }
    if let Some(v) = o.subsample_cap {
        cfg.subsample_cap = v;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String> {
    let run = Run::new(effective_config(cli.global)?)?;
    match cli.command {
        Command::AnalyzeGenres { out } => commands::analyze_genres(&run, out.as_deref()),
        Command::FeaturizeFallback { out, dim, seed } => {
            commands::featurize_fallback(&run, out.as_deref(), dim, seed)
        }
        Command::Cluster { method } => {
            let method: Method = method
                .parse()
                .map_err(|e: gensel::Error| config_error(e.to_string()))?;
            commands::cluster(&run, method)
        }
        Command::Bootstrap => commands::bootstrap(&run),
        Command::Select { strategy, target } => {
            let strategy = strategy
                .map(|s| {
                    s.parse::<Strategy>()
                        .map_err(|e| config_error(e.to_string()))
                })
                .transpose()?;
            commands::select(&run, strategy, target.as_deref())
        }
        Command::Eval {
            gold,
            system,
            baseline,
            out,
        } => {
            let golds = gold
                .iter()
                .map(|s| commands::parse_pair(s))
                .collect::<Result<Vec<_>>>()?;
            let systems = system
                .iter()
                .map(|s| commands::parse_pair(s))
                .collect::<Result<Vec<_>>>()?;
            commands::eval(&run, &golds, &systems, &baseline, out.as_deref())
        }
        Command::Significance {
            gold,
            a,
            b,
            resamples,
            seed,
            comparisons,
            alpha,
        } => commands::significance(
            &run,
            &SignificanceArgs {
                gold,
                a,
                b,
                resamples,
                seed,
                comparisons,
                alpha,
            },
        ),
        Command::ManifestDiff { a, b } => commands::manifest_diff(&a, &b),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Prerequisite>() {
            return 3;
        }
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<gensel::Error>() {
            return if e.kind() == ErrorKind::Config { 2 } else { 4 };
        }
    }
    4
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
