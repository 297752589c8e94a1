use std::process::ExitCode;

fn main() -> ExitCode {
    funceq_cli::run(std::env::args_os())
}
