//! `pws` — passive Wi-Fi sensing from capture pairs.
//!
//! Three subcommands cover the whole workflow without hardware:
//!
//! * `pws synth` turns a scenario file into a reference/surveillance
//!   capture pair,
//! * `pws process` runs the concurrent pipeline over a pair and writes a
//!   spectrogram, detections, and stage statistics,
//! * `pws bench` compares the ambiguity engines over a range of window
//!   sizes.
//!
//! Exit codes: 0 on success, 1 when the inputs are at fault (bad flags,
//! malformed scenario or sidecar contents, infeasible parameter
//! combinations), 2 when reading a file or processing itself fails.

mod commands;
mod config;
mod io;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::config::Invalid;

#[derive(Parser, Debug)]
#[command(name = "pws", version, about = "Passive Wi-Fi sensing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a capture pair from a scenario description.
    Synth(commands::SynthArgs),
    /// Process a capture pair into a spectrogram, detections, and
    /// statistics.
    Process(commands::ProcessArgs),
    /// Time the ambiguity engines against each other.
    Bench(commands::BenchArgs),
}

/// 1 for problems the user can fix by changing inputs, 2 for failures
/// during processing.
fn exit_code_for(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<Invalid>().is_some() {
        return 1;
    }
    match err.downcast_ref::<pws_core::Error>() {
        Some(pws_core::Error::Runtime(_)) => 2,
        Some(_) => 1, // argument, bounds, or configuration
        None => 2,    // I/O and anything unclassified
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::Synth(args) => commands::synth(args),
        Command::Process(args) => commands::process(args),
        Command::Bench(args) => commands::bench(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(exit_code_for(&e));
    }
}
