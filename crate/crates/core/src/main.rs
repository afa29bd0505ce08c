use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use qtomo::cli::{run, Cli, RunConfig, EXIT_ERROR, EXIT_VERIFICATION_FAILED};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = run(&RunConfig::from_cli(&cli));
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &output.body),
        None => std::io::stdout().lock().write_all(output.body.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("qtomo: cannot write output: {e}");
        return ExitCode::from(EXIT_ERROR as u8);
    }
    match output.code {
        0 => ExitCode::SUCCESS,
        EXIT_VERIFICATION_FAILED => {
            eprintln!("qtomo: {} failed its checks", cli.command.name());
            ExitCode::from(EXIT_VERIFICATION_FAILED as u8)
        }
        code => ExitCode::from(code as u8),
    }
}
