use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use multiprop::diagnostics::{summarize, Estimand, DEFAULT_LAGS};
use multiprop::parallel::{Executor, WORKERS_ENV};
use multiprop::runner::io::read_chain_file;
use multiprop::runner::presets::{run_preset, PresetOptions};
use multiprop::runner::{parse_config, run_experiment};
use multiprop::Error;

/// Multiproposal MCMC experiment runner.
#[derive(Parser)]
#[command(name = "multiprop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        config: PathBuf,
        /// Worker threads (0 = all cores); overrides the config.
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
    },
    /// Run a built-in study: toy-sweep, mixture-budget or trend.
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = WORKERS_ENV, default_value_t = 0)]
        workers: usize,
        /// Iterations per chain; each preset has its own default.
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Summarize a chain file.
    Diag {
        chain: PathBuf,
        /// `norm2` or `coord:<k>`.
        #[arg(long, default_value = "norm2")]
        estimand: String,
    },
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_config_error() {
        ExitCode::from(1)
    } else {
        ExitCode::from(2)
    }
}

fn run(command: Command) -> Result<String, (Error, ExitCode)> {
    let config_err = |e: Error| (e, ExitCode::from(1));
    let any_err = |e: Error| {
        let code = exit_code(&e);
        (e, code)
    };
    match command {
        Command::Run { config, workers } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| config_err(Error::Io(format!("{}: {e}", config.display()))))?;
            let cfg = parse_config(&text).map_err(config_err)?;
            let exec = Executor::new(workers.unwrap_or(cfg.run.workers)).map_err(config_err)?;
            let (report, _) = run_experiment(&cfg, &exec).map_err(any_err)?;
            Ok(report.to_json())
        }
        Command::Preset {
            name,
            out,
            seed,
            workers,
            iters,
        } => {
            let exec = Executor::new(workers).map_err(config_err)?;
            let opts = PresetOptions {
                seed,
                iters,
                out_dir: out,
            };
            run_preset(&name, &opts, &exec).map_err(any_err)
        }
        Command::Diag { chain, estimand } => {
            let estimand: Estimand = estimand.parse().map_err(config_err)?;
            let record = read_chain_file(&chain).map_err(config_err)?;
            let summary = summarize(&record, estimand, &DEFAULT_LAGS).map_err(any_err)?;
            Ok(serde_json::to_string_pretty(&summary).expect("summaries serialize to JSON"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err((e, code)) => {
            eprintln!("error: {e}");
            code
        }
    }
}
