use std::process::ExitCode;

mod commands;
mod config;

fn main() -> ExitCode {
    commands::run()
}
