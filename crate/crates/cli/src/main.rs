use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;
use dmtlab_cli::cli::Cli;
use dmtlab_cli::commands;
use dmtlab_cli::error::{CliError, CliResult};

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.output {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
            let mut out = BufWriter::new(file);
            commands::run(cli, &mut out)?;
            out.flush()
                .map_err(|e| CliError::io(format!("writing {}", path.display()), e))
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            commands::run(cli, &mut out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
