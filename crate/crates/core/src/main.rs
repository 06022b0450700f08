use std::process::ExitCode;

fn main() -> ExitCode {
    resk::cli::main_with_args(std::env::args_os())
}
