use std::process::ExitCode;

use clap::Parser;
use strata_bounds::cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(run) => {
            if let Some(note) = &run.note {
                eprintln!("{note}");
            }
            print!("{}", run.render(cli.format));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
