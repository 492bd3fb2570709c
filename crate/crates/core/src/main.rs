use std::process::ExitCode;

fn main() -> ExitCode {
    xdqn::cli::run(std::env::args_os())
}
