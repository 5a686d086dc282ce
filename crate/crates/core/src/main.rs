use std::process::ExitCode;

use clap::Parser;
use spikesel::cli::{run, Cli};

fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}
