//! Experiment runner: reads a TOML experiment config, runs one command and
//! writes canonical CSV/JSON artifacts plus a run manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod model;
pub mod output;
pub mod validate;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};

pub use config::{Command, ExperimentConfig};
pub use error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Action {
    Validate,
    Pressure,
    Gibbs,
    Normalize,
    Orbits,
    ZetaScan,
    Residue,
    Equidist,
    Window,
    Perron,
    PsiEll,
    DolgopyatProbe,
    Telescope,
}

impl Action {
    fn command(self) -> Option<Command> {
        Some(match self {
            Action::Validate => return None,
            Action::Pressure => Command::Pressure,
            Action::Gibbs => Command::Gibbs,
            Action::Normalize => Command::Normalize,
            Action::Orbits => Command::Orbits,
            Action::ZetaScan => Command::ZetaScan,
            Action::Residue => Command::Residue,
            Action::Equidist => Command::Equidist,
            Action::Window => Command::Window,
            Action::Perron => Command::Perron,
            Action::PsiEll => Command::PsiEll,
            Action::DolgopyatProbe => Command::DolgopyatProbe,
            Action::Telescope => Command::Telescope,
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "orbitflow", version, about = "Run orbit-counting and transfer-operator experiments from a config file")]
pub struct Cli {
    /// Command to run; defaults to `run.command` from the config.
    #[arg(value_enum)]
    pub action: Option<Action>,
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `run.workers` (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Suppress the stdout summary.
    #[arg(long)]
    pub quiet: bool,
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = Some(seed);
    }
    if let Some(w) = cli.workers {
        cfg.run.workers = w;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let action = cli.action.or(cfg.run.command.map(|c| match c {
        Command::Pressure => Action::Pressure,
        Command::Gibbs => Action::Gibbs,
        Command::Normalize => Action::Normalize,
        Command::Orbits => Action::Orbits,
        Command::ZetaScan => Action::ZetaScan,
        Command::Residue => Action::Residue,
        Command::Equidist => Action::Equidist,
        Command::Window => Action::Window,
        Command::Perron => Action::Perron,
        Command::PsiEll => Action::PsiEll,
        Command::DolgopyatProbe => Action::DolgopyatProbe,
        Command::Telescope => Action::Telescope,
    }));
    let Some(action) = action else {
        return Err(CliError::Schema("no command given and run.command is not set".into()));
    };
    match action.command() {
        None => {
            let report = validate::validate(&cfg, None);
            if !cli.quiet {
                if let Some(p) = report.pressure {
                    println!("P(psi) = {}", output::f(p));
                }
                for c in &report.costs {
                    println!(
                        "cost estimate {}: budget {}, periods <= {}, {} periodic points",
                        c.command, c.budget, c.max_period, c.periodic_points
                    );
                }
            }
            if report.passed() {
                if !cli.quiet {
                    println!("validate: pass");
                }
                Ok(())
            } else {
                Err(CliError::Invalid(report.violations))
            }
        }
        Some(cmd) => commands::run(&cfg, cmd, &out, cli.quiet).map(|_| ()),
    }
}
