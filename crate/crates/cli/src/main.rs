use std::process::ExitCode;

use clap::Parser;

use gait_impedance_cli::config::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match gait_impedance_cli::run(cli.command) {
        Ok(done) => {
            print!("{}", done.summary);
            ExitCode::from(done.outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
