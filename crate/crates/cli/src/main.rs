use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(fxmatch_cli::run(std::env::args_os()) as u8)
}
