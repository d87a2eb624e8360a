//! `normdyn` command-line interface.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Outputs, UsageError};
use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "normdyn", version, about = "Social norms, payoff matrices and norm dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Classify all 16 binary norms.
    Classify,
    /// Build the payoff matrix numerically and in closed form.
    Gamma,
    /// Sample replicator basins and vertex spectra.
    Simulate,
    /// Write the rationality, reward-ratio, stability and MI maps.
    Sweep,
    /// Run the closed-loop agent simulation.
    Abm,
    /// Run the two-population partisan demo.
    PartisanDemo,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Gamma => "gamma",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Abm => "abm",
            Command::PartisanDemo => "partisan-demo",
        }
    }
}

fn resolve(o: &Overrides) -> anyhow::Result<RunConfig> {
    let mut c = match &o.config {
        Some(path) => RunConfig::load(path).map_err(|e| UsageError(format!("{e:#}")))?,
        None => RunConfig::default(),
    };
    c.apply(o);
    Ok(c)
}

fn execute(cmd: Command, c: &RunConfig) -> anyhow::Result<()> {
    let mut out = Outputs::new(&c.out)?;
    let result = match cmd {
        Command::Classify => commands::classify(c, &mut out),
        Command::Gamma => commands::gamma(c, &mut out),
        Command::Simulate => commands::simulate(c, &mut out),
        Command::Sweep => commands::sweep(c, &mut out),
        Command::Abm => commands::abm_run(c, &mut out),
        Command::PartisanDemo => commands::partisan_demo(c, &mut out),
    }
    .map(|()| {
        let names = out.names();
        println!("wrote {} to {}", names.join(", "), c.out.display());
        
    });
    match result {
        Ok(()) => out.finish(cmd.name(), c),
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

fn is_usage(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<UsageError>()
            || matches!(
                c.downcast_ref::<normdyn::Error>(),
                Some(normdyn::Error::Parameter(_))
            )
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(&cli.overrides).and_then(|c| execute(cli.command, &c));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_usage(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
