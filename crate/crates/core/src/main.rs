use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(immunet::cli::run(std::env::args()) as u8)
}
