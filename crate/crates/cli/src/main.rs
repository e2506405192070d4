mod args;
mod commands;
mod input;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Input or configuration problems exit with 2.
const EXIT_INPUT: u8 = 2;
/// Singular fits, degenerate statistics and similar exit with 3.
const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }

    /// Library error raised during `stage`.
    pub fn core(stage: &str, err: drci::Error) -> Self {
        let code = if err.is_numerical() {
            EXIT_NUMERICAL
        } else {
            EXIT_INPUT
        };
        Self {
            code,
            message: format!("{stage}: {err}"),
        }
    }

    pub fn context(self, what: &str) -> Self {
        Self {
            message: format!("{what}: {}", self.message),
            ..self
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("DRCI_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|t| *t >= 1)
        .ok_or_else(|| {
            CliError::input(format!(
                "DRCI_THREADS must be a positive integer, got '{value}'"
            ))
        })?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::input(format!("configuring {threads} threads: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn emit(text: &str, path: Option<&std::path::Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::input(format!("writing {}: {e}", p.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::input(format!("writing output: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Test(a) => emit(&commands::test(a)?, a.output.as_deref()),
        Command::Tune(a) => emit(&commands::tune(a)?, a.output.as_deref()),
        Command::Simulate(a) => emit(&commands::simulate(a)?, a.output.as_deref()),
        Command::Granger(a) => emit(&commands::granger(a)?, a.output.as_deref()),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors and 0 for --help
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("drci: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
