//! `anb`: builds a synthetic accelerator-aware NAS benchmark and runs
//! searches on it.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use anb::data::Split;
use anb::optim::PerfMetric;
use clap::{Parser, Subcommand, ValueEnum};

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "anb",
    version,
    about = "Synthetic accelerator-aware NAS benchmark toolkit"
)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the top-level `seed` key.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Overrides the top-level `out` key.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Throughput,
    Latency,
}

#[derive(Subcommand)]
enum Command {
    /// Search the scheme grid for the best proxy training scheme.
    ProxySearch {
        /// Time budget per model in hours; `inf` drops the constraint.
        #[arg(long, value_name = "HOURS")]
        t_spec: Option<f64>,
    },
    /// Sample architectures and write one dataset per metric.
    Collect {
        /// Number of architectures; overrides `collect.n`.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fit surrogates with `surrogate.fit`.
    Fit {
        /// Dataset names; defaults to `surrogate.datasets`.
        #[arg(long = "dataset", value_name = "NAME")]
        datasets: Vec<String>,
    },
    /// Random-search GBDT hyperparameters, then fit the best configuration.
    Tune {
        #[arg(long = "dataset", value_name = "NAME")]
        datasets: Vec<String>,
    },
    /// Print r2, tau and MAE of a saved surrogate on one split.
    Eval {
        #[arg(long, value_name = "NAME")]
        dataset: String,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Run the configured optimizers against the saved surrogates.
    Simulate,
    /// Pareto front over trajectory CSVs.
    Pareto {
        /// Performance direction; defaults to the simulate objective.
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
        /// Trajectory files; defaults to `<out>/simulate/*_seed*.csv`.
        inputs: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    cfg.validate()?;
    if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::ProxySearch { t_spec } => commands::proxy_search(&cfg, t_spec),
        Command::Collect { n } => {
            if n == Some(0) {
                return Err(CliError::Config("--n must be positive".into()));
            }
            commands::collect_cmd(&cfg, n)
        }
        Command::Fit { datasets } => commands::fit(&cfg, &datasets),
        Command::Tune { datasets } => commands::tune_cmd(&cfg, &datasets),
        Command::Eval { dataset, split } => commands::eval(&cfg, &dataset, split.into()),
        Command::Simulate => commands::simulate(&cfg),
        Command::Pareto { metric, inputs } => {
            let metric = metric.map(|m| match m {
                MetricArg::Throughput => PerfMetric::Throughput,
                MetricArg::Latency => PerfMetric::Latency,
            });
            commands::pareto(&cfg, &inputs, metric)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
