use std::process::ExitCode;

use clap::Parser;
use prism_cli::{configure_threads, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("prism: error: {msg}");
            ExitCode::FAILURE
        }
    }
}
