use std::process::ExitCode;

use clap::Parser;

use sdd_cli::args::Cli;
use sdd_cli::{run, Outcome};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(Outcome::Text(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Ok(Outcome::Report { report, path }) => {
            println!("{}", path.display());
            eprintln!("{} {} in {:.3} s", report.command, report.problem, report.wall_time_s);
            let failures = report.failures();
            if failures.is_empty() {
                return ExitCode::SUCCESS;
            }
            for (key, verdict) in failures {
                match report.notes.get(key) {
                    Some(note) => eprintln!("{key}: {verdict} ({note})"),
                    None => eprintln!("{key}: {verdict}"),
                }
            }
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
