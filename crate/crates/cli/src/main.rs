use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dml_cli::commands;
use dml_cli::config::{parse_config, RunConfig};
use dml_cli::CliError;
use dml_core::learners::{DictionaryKind, RegressionConfig};

/// Exit status when every computation finished but some cells were flagged.
const FLAGGED: u8 = 3;

#[derive(Parser)]
#[command(name = "dml", version = commands::VERSION, about = "Debiased machine learning for global and local functionals")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Learner {
    Lasso,
    Forest,
    Mlp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Regime {
    Low,
    High,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cross-fitted estimate and confidence interval from a CSV file.
    Estimate {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo coverage table for the simulation design.
    Simulate {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<usize>,
        /// Replaces the regression model, keeping the configured dictionary unless --regime is given.
        #[arg(long, value_enum)]
        learner: Option<Learner>,
        #[arg(long, value_enum)]
        regime: Option<Regime>,
    },
    /// Finite-sample bound calculators.
    Bounds {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Collate coverage CSVs in a directory into one markdown document.
    Report {
        #[arg(default_value = "out")]
        dir: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
    path.map(parse_config).transpose().map(|c| c.unwrap_or_else(RunConfig::empty))
}

fn init_threads(cfg: &RunConfig) -> Result<(), CliError> {
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot start {t} worker threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Cmd::Estimate { config, output, seed } => {
            let mut cfg = load(Some(&config))?;
            cfg.output = output.unwrap_or(cfg.output);
            cfg.seed = seed.unwrap_or(cfg.seed);
            init_threads(&cfg)?;
            let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
            commands::estimate(&cfg, &base)
        }
        Cmd::Simulate { config, output, seed, replications, learner, regime } => {
            let mut cfg = load(config.as_deref())?;
            cfg.output = output.unwrap_or(cfg.output);
            cfg.seed = seed.unwrap_or(cfg.seed);
            if let Some(r) = replications {
                cfg.simulation.get_or_insert_with(Default::default).replications = r;
            }
            let mut reg = cfg.regression_or_default();
            if let Some(r) = regime {
                let dict = match r {
                    Regime::Low => DictionaryKind::Low,
                    Regime::High => DictionaryKind::High,
                };
                reg.dictionary = dict;
                if let Some(riesz) = cfg.riesz.as_mut() {
                    riesz.dictionary = dict;
                }
            }
            if let Some(l) = learner {
                reg.model = match l {
                    Learner::Lasso => RegressionConfig::lasso(reg.dictionary).model,
                    Learner::Forest => RegressionConfig::forest(reg.dictionary).model,
                    Learner::Mlp => RegressionConfig::mlp(reg.dictionary).model,
                };
            }
            cfg.regression = Some(reg);
            init_threads(&cfg)?;
            commands::simulate(&cfg)
        }
        Cmd::Bounds { config, output } => {
            let mut cfg = load(Some(&config))?;
            cfg.output = output.unwrap_or(cfg.output);
            commands::bounds(&cfg)
        }
        Cmd::Report { dir, output } => commands::report(&dir, output),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DML_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(FLAGGED),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
