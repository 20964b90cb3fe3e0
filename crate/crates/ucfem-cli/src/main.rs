//! Binary entry point: thin wrapper around [`ucfem_cli::cli::run`] that maps
//! errors to exit codes. Usage and configuration errors exit with 2,
//! runtime failures with 1.

use std::process::ExitCode;

use ucfem_cli::cli;
use ucfem_cli::commands::CliError;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match cli::run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err((err, written)) => {
            eprintln!("{err}");
            if !written.is_empty() {
                eprintln!("partial outputs written: {}", written.join(", "));
            }
            match err {
                CliError::Usage(_) | CliError::Config(_) => ExitCode::from(2),
                CliError::Run(_) => ExitCode::from(1),
            }
        }
    }
}
