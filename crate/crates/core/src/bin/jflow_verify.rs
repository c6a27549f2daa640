//! Independent cross-checks of the symmetric-function kernels.
//!
//! Prints a pass/fail table, writes a JSON report and exits nonzero if any
//! check fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use jflow::oracle::verification_suite;

#[derive(Debug, Parser)]
#[command(
    name = "jflow-verify",
    version,
    about = "Cross-check kernels against brute-force oracles"
)]
struct Cli {
    /// Where to write the JSON report.
    #[arg(short, long, default_value = "verify_report.json")]
    report: PathBuf,

    /// Seed for the random samples.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcomes = verification_suite(cli.seed);
    let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
    for o in &outcomes {
        let mark = if o.passed { "PASS" } else { "FAIL" };
        println!("{mark}  {:width$}  {}", o.name, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} checks, {failed} failed", outcomes.len());
    let report = serde_json::json!({
        "seed": cli.seed,
        "passed": failed == 0,
        "checks": outcomes,
    });
    if let Err(e) = std::fs::write(
        &cli.report,
        serde_json::to_string_pretty(&report).expect("report serializes"),
    ) {
        eprintln!("error: cannot write {}: {e}", cli.report.display());
        return ExitCode::from(1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
