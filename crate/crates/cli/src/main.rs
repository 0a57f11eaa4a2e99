use std::process::ExitCode;

fn main() -> ExitCode {
    grouptest_cli::run(std::env::args_os())
}
