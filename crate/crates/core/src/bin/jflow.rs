//! Runs a J-flow scenario and writes its artifacts.
//!
//! Exit codes: 0 converged, 2 budget exhausted, 3 cone exit, 1 any error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use jflow::scenario::{apply_overrides, parse_config, preset, run_scenario, PRESETS};

#[derive(Debug, Parser)]
#[command(
    name = "jflow",
    version,
    about = "General J-flow on a flat complex torus"
)]
struct Cli {
    /// TOML config file.
    #[arg(required_unless_present_any = ["preset", "list_presets"], conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Start from a built-in preset instead of a file.
    #[arg(long)]
    preset: Option<String>,

    /// List preset names and exit.
    #[arg(long)]
    list_presets: bool,

    /// Output directory.
    #[arg(short, long, default_value = "jflow-out")]
    out: PathBuf,

    /// Override a config key, e.g. `--set flow.dt_initial=0.005`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Seed for the certificate search (same as `--set seed=..`).
    #[arg(long)]
    seed: Option<u64>,

    /// Print the resolved config and exit without running.
    #[arg(long)]
    dry_run: bool,

    /// More output; repeat for debug logs.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Only errors.
    #[arg(short, long, conflicts_with = "verbose")]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    if cli.list_presets {
        for name in PRESETS {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> jflow::Result<u8> {
    let text = match (&cli.config, &cli.preset) {
        (Some(path), _) => std::fs::read_to_string(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    let config = parse_config(&apply_overrides(&text, &overrides)?)?;
    if cli.dry_run {
        println!("{}", serde_json::to_string_pretty(&config)?);
        return Ok(0);
    }
    let outcome = run_scenario(&config, &cli.out)?;
    if cli.quiet {
        return Ok(outcome.status.exit_code() as u8);
    }
    println!(
        "{}: {:?} after {} steps, t = {:?} (artifacts in {})",
        config.scenario,
        outcome.status,
        outcome.run.steps,
        outcome.run.t,
        outcome.out_dir.display()
    );
    Ok(outcome.status.exit_code() as u8)
}
