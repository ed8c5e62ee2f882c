use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use madacc_cli::commands::latest_records;
use madacc_cli::{cmd_evaluate, cmd_inspect, cmd_prepare, cmd_run, CliError, Method, RunConfig, RunOptions};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "madacc", version, about = "Classify argument components by multi-agent debate")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true, default_value = "madacc.toml")]
    config: PathBuf,
    /// Overrides `debate.rng_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `parallelism`.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mask every component of the split and write the instances file.
    Prepare {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a method over the prepared instances.
    Run {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        instances: Option<PathBuf>,
        #[arg(long)]
        run_dir: Option<PathBuf>,
        /// No per-instance progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Score a predictions file or run directory.
    Evaluate {
        predictions: PathBuf,
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Print the debate trace for one instance.
    Inspect {
        #[arg(long)]
        id: String,
        /// Records file or run directory; defaults to the latest debate run.
        #[arg(long)]
        records: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::load(&cli.config)?;
    config
        .apply_overrides(cli.seed, cli.parallelism)
        .map_err(|message| CliError::Config {
            path: cli.config.clone(),
            message,
        })?;
    Ok(config)
}

async fn dispatch(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Prepare { out } => {
            let config = load_config(&cli)?;
            let outcome = cmd_prepare(&config, out.as_deref())?;
            println!("{}", outcome.summary);
            println!("wrote {}", outcome.path.display());
        }
        Command::Run {
            method,
            instances,
            run_dir,
            quiet,
        } => {
            let config = load_config(&cli)?;
            let options = RunOptions {
                instances: instances.clone(),
                run_dir: run_dir.clone(),
                quiet: *quiet,
            };
            let outcome = cmd_run(&config, *method, options).await?;
            print!("{}", outcome.report_text);
            println!(
                "{} instances, {} failed; tokens in {} / out {}",
                outcome.total, outcome.failed, outcome.usage.input_tokens, outcome.usage.output_tokens
            );
            println!("run directory: {}", outcome.run_dir.display());
        }
        Command::Evaluate { predictions, json_out } => {
            let outcome = cmd_evaluate(predictions, json_out.as_deref())?;
            print!("{}", outcome.text);
            println!("json report: {}", outcome.json_path.display());
        }
        Command::Inspect { id, records } => {
            let records = match records {
                Some(p) => p.clone(),
                None => {
                    let config = load_config(&cli)?;
                    latest_records(&config).ok_or_else(|| CliError::NoRecords(config.output_dir.join("runs")))?
                }
            };
            print!("{}", cmd_inspect(&records, id)?);
        }
    }
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match dispatch(Cli::parse()).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
