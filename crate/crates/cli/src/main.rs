//! `qmep`: batch sweeps over the maximum-entropy closure.

mod commands;
mod config;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Verb;
use crate::config::{ConfigError, RunConfig, Scenario};

#[derive(Debug, Parser)]
#[command(name = "qmep", version, about = "Closure inversion, production tables, mobility sweeps and relaxation runs")]
struct Cli {
    #[command(subcommand)]
    verb: VerbArg,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV destination; overrides `output` in the config. Defaults to stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for the sweep (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Multiplier of the second-order corrections; overrides the config.
    #[arg(long, global = true)]
    hbar_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum VerbArg {
    /// Recover multipliers from moment targets.
    Invert,
    /// Relaxation time and zeroth/second-order mobility.
    Mobility,
    /// Homogeneous relaxation trajectories.
    Relax,
    /// Phonon production terms per channel.
    Production,
}

impl From<VerbArg> for Verb {
    fn from(v: VerbArg) -> Self {
        match v {
            VerbArg::Invert => Verb::Invert,
            VerbArg::Mobility => Verb::Mobility,
            VerbArg::Relax => Verb::Relax,
            VerbArg::Production => Verb::Production,
        }
    }
}

const CONFIG_ERROR: u8 = 2;

fn load(cli: &Cli) -> Result<Scenario, ConfigError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("--config <path> is required".into()))?;
    let (mut cfg, base) = RunConfig::load(path)?;
    if let Some(s) = cli.hbar_scale {
        cfg.hbar_scale = s;
    }
    if let Some(o) = &cli.output {
        cfg.output = Some(o.clone());
    } else if let Some(o) = &cfg.output {
        cfg.output = Some(base.join(o));
    }
    Scenario::from_config(cfg, &base)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let scenario = match load(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("qmep: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("qmep: --threads must be >= 1");
            return ExitCode::from(CONFIG_ERROR);
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("qmep: cannot start worker pool: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };

    let verb = Verb::from(cli.verb);
    let mut table = pool.install(|| commands::run(verb, &scenario));
    if verb == Verb::Mobility {
        table.note("mu0, mu2 and mu_total are signed as J = n mu E with drift force -qE; abs_mu_total is the magnitude");
    }
    let text = table.render();
    match &scenario.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("qmep: cannot write {}: {e}", path.display());
                return ExitCode::from(CONFIG_ERROR);
            }
        }
        None => print!("{text}"),
    }
    if table.failures() > 0 {
        eprintln!("qmep: {} sweep point(s) failed", table.failures());
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
