use std::process::ExitCode;

use clap::Parser;
use multico::cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}
