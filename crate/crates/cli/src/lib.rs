//! Command-line front end for `funceq-core`.

pub mod commands;
pub mod output;
pub mod specfile;

use std::process::ExitCode;

use clap::Parser;

pub use commands::Cli;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILED: u8 = 1;
    pub const WITNESS_ONLY: u8 = 2;
    pub const NO_GUARANTEE: u8 = 3;
    pub const DIVERGENT: u8 = 4;
    pub const MAX_ITER: u8 = 5;
    pub const USAGE: u8 = 64;
    pub const DATA: u8 = 65;
}

/// Parses `args` and runs the selected command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    let mut stdout = std::io::stdout().lock();
    match commands::execute(&cli, &mut stdout) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
