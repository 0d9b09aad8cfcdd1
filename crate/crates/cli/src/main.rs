use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(transplane_cli::main_with(std::env::args_os()))
}
