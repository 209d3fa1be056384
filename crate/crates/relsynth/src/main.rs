use std::process::ExitCode;

fn main() -> ExitCode {
    relsynth::cli::init_logging();
    ExitCode::from(relsynth::cli::run(std::env::args_os()))
}
