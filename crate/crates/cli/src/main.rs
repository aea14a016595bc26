use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dofw_cli::config::{self, ExperimentConfig};
use dofw_cli::runner;
use dofw_cli::CliError;

#[derive(Parser)]
#[command(
    name = "dofw",
    about = "Distributed online Frank-Wolfe simulator: runs experiments from JSON configs and writes CSV artifacts",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or a shipped preset.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shipped preset: fig1, fig2 or fig3.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (default: config's out_dir, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Validate and certify the configuration, run nothing.
    #[arg(long)]
    check_only: bool,
}

fn main() -> ExitCode {
    // Worker threads are the only environment knob.
    if let Ok(threads) = std::env::var("DOFW_THREADS") {
        if let Ok(threads) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not errors.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let Command::Run(args) = cli.command;
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: RunArgs) -> Result<(), CliError> {
    let text = match (&args.config, &args.preset) {
        (Some(path), None) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?,
        (None, Some(name)) => config::preset(name)
            .ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?
            .to_string(),
        _ => {
            return Err(CliError::Config(
                "provide exactly one of --config <path> or --preset <name>".into(),
            ))
        }
    };
    let mut config: ExperimentConfig = config::parse(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
        config.network.seed = None;
        config.loss.seed = None;
    }
    let out_dir = args.out.unwrap_or_else(|| runner::default_out_dir(&config));
    let summary = runner::run_experiment(&config, &out_dir, args.check_only)?;
    if !args.check_only {
        println!(
            "wrote {} cell(s) to {}; all checks {}",
            summary.cells.len(),
            out_dir.display(),
            if summary.ok { "passed" } else { "FAILED" }
        );
    }
    Ok(())
}
