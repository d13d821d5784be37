use std::process::ExitCode;

fn main() -> ExitCode {
    qfound_core::cli::main_with(std::env::args_os())
}
