//! Command implementations behind the `agvc` binary.

pub mod args;
pub mod commands;
pub mod config;
pub mod manifest;

use agvc_core::Error;

pub use args::{Cli, Command};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_DIVERGENCE: u8 = 3;
pub const EXIT_CONFIG: u8 = 4;

/// Runs one command and returns the path of its primary output.
pub fn run(cli: &Cli) -> anyhow::Result<std::path::PathBuf> {
    match &cli.command {
        Command::Synthcorpus(a) => commands::synthcorpus(a),
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Train(a) => commands::train(a),
        Command::Convert(a) => commands::convert(a),
        Command::Probe(a) => commands::probe(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Compare(a) => commands::compare(a),
    }
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|cause| cause.downcast_ref::<Error>())
        .map_or(EXIT_INPUT, |e| match e {
            Error::Divergence { .. } => EXIT_DIVERGENCE,
            Error::Config(_) | Error::Checkpoint(_) => EXIT_CONFIG,
            _ => EXIT_INPUT,
        })
}
