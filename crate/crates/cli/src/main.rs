use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use codewe_cli::cli::error_json;
use codewe_cli::error::EXIT_INPUT;
use codewe_cli::{run, Cli, OutputFormat};
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_INPUT);
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("CODEWE_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.render(cli.output));
            ExitCode::from(outcome.exit)
        }
        Err(e) => {
            match cli.output {
                OutputFormat::Json => println!("{}", error_json(&e)),
                OutputFormat::Text => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
