use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use specverse_cli::{run, Cli, CliError, VERSION};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = match Cli::command().version(VERSION.as_str()).try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            // Help and version requests print to stdout and succeed.
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(&e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn report_error(e: &CliError) {
    eprintln!("specverse: error: {}: {e}", e.category());
}
