use std::process::ExitCode;

fn main() -> ExitCode {
    compsel::cli::main_with_args(std::env::args())
}
