use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mattebench::cli::run() as u8)
}
