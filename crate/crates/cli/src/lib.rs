//! Command-line front end for the `gait-impedance` library.

pub mod commands;
pub mod config;
pub mod svg;

use anyhow::Result;

use commands::Done;
use config::Command;

pub fn run(command: Command) -> Result<Done> {
    let cfg = command.config().clone().resolve()?;
    match command {
        Command::Estimate(_) => commands::cmd_estimate(&cfg),
        Command::Evaluate(_) => commands::cmd_evaluate(&cfg),
        Command::Tune(_) => commands::cmd_tune(&cfg),
        Command::Synth(_) => commands::cmd_synth(&cfg),
        Command::Report(_) => commands::cmd_report(&cfg),
        Command::Fixture(_) => commands::cmd_fixture(&cfg),
        Command::Sweep(_) => commands::cmd_sweep(&cfg),
    }
}
