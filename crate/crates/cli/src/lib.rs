//! Command-line front end over the `sdd-core` problem registry.

pub mod args;
pub mod commands;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

use args::Command;
use report::RunReport;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] sdd_core::SddError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug)]
pub enum Outcome {
    Text(String),
    Report { report: RunReport, path: PathBuf },
}

/// Runs one subcommand. Reports are written to the output directory.
pub fn run(command: &Command) -> CliResult<Outcome> {
    let start = Instant::now();
    let (mut report, out) = match command {
        Command::List => return Ok(Outcome::Text(commands::cmd_list())),
        Command::Verify(a) => (commands::cmd_verify(a)?, &a.out),
        Command::Branches(a) => (commands::cmd_branches(a)?, &a.out),
        Command::Classify(a) => (commands::cmd_classify(a)?, &a.out),
        Command::Certify(a) => (commands::cmd_certify(a)?, &a.out),
        Command::Export3d(a) => (commands::cmd_export3d(a)?, &a.run.out),
        Command::Sweep(a) => (commands::cmd_sweep(a)?, &a.run.out),
    };
    report.wall_time_s = start.elapsed().as_secs_f64();
    let path = report.write(out)?;
    Ok(Outcome::Report { report, path })
}
