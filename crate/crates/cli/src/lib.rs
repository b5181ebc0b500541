pub mod args;
pub mod config;
pub mod emit;
pub mod error;
pub mod run;
pub mod svg;

use args::Cli;
use error::Result;

/// Parses, runs and writes; returns the process exit code on success paths
/// (0, or 1 when a check inside the report failed).
pub fn main_with(cli: &Cli) -> Result<i32> {
    let (run, output) = config::parse_config(&cli.command)?;
    let artifacts = run::execute(&run)?;
    let written = emit::emit(&artifacts, &output)?;
    if output.dir.is_some() {
        for line in &artifacts.summary {
            println!("{line}");
        }
        for p in written {
            println!("wrote {}", p.display());
        }
    }
    Ok(if artifacts.passed { 0 } else { 1 })
}
