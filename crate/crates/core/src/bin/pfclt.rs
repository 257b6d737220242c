use std::process::ExitCode;

use clap::Parser;
use pfclt::cli::{dispatch, Cli, RunManifest};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let manifest = RunManifest::from_command(&cli.command);
    match dispatch(&manifest) {
        Ok(files) => {
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.error_line());
            ExitCode::FAILURE
        }
    }
}
