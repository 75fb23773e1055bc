use std::process::ExitCode;

fn main() -> ExitCode {
    dyncover_cli::run(std::env::args_os())
}
