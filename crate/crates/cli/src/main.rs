//! `edgepriv` command-line driver.
//!
//! Exit codes: 0 on success, 1 on configuration or usage errors, 2 on
//! runtime errors.

mod commands;
mod layout;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edgepriv::privacy::Epsilon;
use edgepriv::{Error, ExperimentConfig};

#[derive(Parser)]
#[command(name = "edgepriv", version, about = "Privacy-aware MEC offloading simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate topology and mobility-trace artifacts.
    Generate(Common),
    /// Run the seeds x epsilons grid and write one outcome CSV per run.
    Run {
        #[command(flatten)]
        common: Common,
        /// Generate missing topology/trace artifacts first.
        #[arg(long)]
        generate: bool,
    },
    /// Aggregate outcome CSVs into the report and per-figure CSVs.
    Report(Common),
    /// Generate, run and report in one go.
    All(Common),
    /// Print a complete configuration file with every default.
    Config {
        /// Print the desk-scale preset instead of the full-scale defaults.
        #[arg(long)]
        desk: bool,
    },
}

#[derive(Args, Clone)]
pub struct Common {
    /// TOML configuration file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds to use, e.g. `1-30` or `1,2,7`; overrides the config.
    #[arg(long)]
    seeds: Option<String>,
    /// Privacy levels in 1/m, e.g. `inf,0.1,0.01`; overrides the config.
    #[arg(long)]
    epsilons: Option<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Replace existing outputs.
    #[arg(long)]
    overwrite: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, Error> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::config(format!("bad seed list entry `{part}`"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (
                    a.trim().parse().map_err(|_| bad())?,
                    b.trim().parse().map_err(|_| bad())?,
                );
                if a > b {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(seeds)
}

fn parse_epsilons(text: &str) -> Result<Vec<Epsilon>, Error> {
    text.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect()
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = &self.seeds {
            config.seeds = parse_seeds(s)?;
        }
        if let Some(e) = &self.epsilons {
            config.privacy.epsilon_per_meter = parse_epsilons(e)?;
        }
        config.validate()?;
        Ok(config)
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Config { desk } => {
            let config = if desk {
                ExperimentConfig::desk_scale()
            } else {
                ExperimentConfig::default()
            };
            print!("{}", config.to_toml_string());
            Ok(())
        }
        Command::Generate(c) => commands::generate(&c.load()?, &c),
        Command::Run { common, generate } => commands::run(&common.load()?, &common, generate),
        Command::Report(c) => commands::report(&c.load()?, &c),
        Command::All(c) => {
            let config = c.load()?;
            commands::generate(&config, &c)?;
            commands::run(&config, &c, false)?;
            commands::report(&config, &c)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1-3,7").unwrap(), vec![1, 2, 3, 7]);
        assert_eq!(parse_seeds("").unwrap(), Vec::<u64>::new());
        assert!(parse_seeds("3-1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn epsilon_lists() {
        let e = parse_epsilons("inf, 0.1,0.01").unwrap();
        assert_eq!(e.len(), 3);
        assert!(e[0].is_none());
        assert!(parse_epsilons("0").is_err());
    }
}
