use std::process::ExitCode;

fn main() -> ExitCode {
    unmasking_trees::cli::main_with_args(std::env::args().collect())
}
