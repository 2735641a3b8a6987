use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use warnsim_core::experiment::{run_experiment, ExperimentOptions};
use warnsim_core::report::write_reports;
use warnsim_core::scenario::{preset_names, preset_source, ConfigError, ScenarioConfig};

/// Warning-dissemination experiments on urban vehicular and pedestrian networks.
#[derive(Parser)]
#[command(name = "warnsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every protocol × density × seed of a scenario and write reports.
    Run {
        /// Scenario TOML file or bundled preset name.
        config: String,
        /// Comma-separated seeds overriding the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Output directory (default: results/<scenario name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fail if any equilibrium computation did not converge.
        #[arg(long)]
        strict: bool,
        /// Parallel worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check a scenario and list every problem found.
    Validate {
        /// Scenario TOML file or bundled preset name.
        config: String,
    },
    /// List bundled presets, or print one.
    Presets {
        name: Option<String>,
    },
}

fn load(config: &str) -> Result<ScenarioConfig> {
    let path = Path::new(config);
    if path.exists() {
        return ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()));
    }
    match preset_source(config) {
        Some(src) => Ok(ScenarioConfig::from_toml_str(src)?),
        None => bail!("{config}: no such file or preset (available: {})", preset_names().collect::<Vec<_>>().join(", ")),
    }
}

fn run(config: &str, seeds: Option<Vec<u64>>, out: Option<PathBuf>, strict: bool, jobs: usize) -> Result<()> {
    let cfg = load(config)?;
    let opts = ExperimentOptions { seeds, jobs, strict };
    let exp = match run_experiment(&cfg, &opts) {
        Err(warnsim_core::experiment::ExperimentError::Config(ConfigError::Invalid(errs))) => {
            for e in &errs {
                eprintln!("error: {e}");
            }
            bail!("{} validation error(s)", errs.len());
        }
        other => other?,
    };
    let dir = out.unwrap_or_else(|| PathBuf::from("results").join(&exp.config.name));
    let files = write_reports(&exp, &dir)?;
    for g in &exp.groups {
        let k = &g.key;
        let mut line = format!("{:<18} density={:<6}", k.protocol.name(), k.density);
        if let Some(v) = k.sweep_value {
            line.push_str(&format!(" sweep={v:<6}"));
        }
        for name in ["fdr_600", "fdr_1200", "duplicates", "coverage", "messages_total", "e2e_loss"] {
            if let Some(m) = g.metric(name) {
                match m.half_width {
                    Some(h) => line.push_str(&format!(" {name}={:.4}±{:.4}", m.mean, h)),
                    None => line.push_str(&format!(" {name}={:.4}", m.mean)),
                }
            }
        }
        println!("{line}");
    }
    if exp.flagged_runs() > 0 {
        eprintln!("warning: {} run(s) had non-converged equilibria", exp.flagged_runs());
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn validate(config: &str) -> Result<bool> {
    let cfg = load(config)?;
    let errs = cfg.validate();
    if errs.is_empty() {
        println!("{config}: ok");
        return Ok(true);
    }
    for e in &errs {
        println!("error: {e}");
    }
    Ok(false)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seeds, out, strict, jobs } => run(&config, seeds, out, strict, jobs).map(|_| true),
        Command::Validate { config } => validate(&config),
        Command::Presets { name: None } => {
            for n in preset_names() {
                println!("{n}");
            }
            Ok(true)
        }
        Command::Presets { name: Some(n) } => match preset_source(&n) {
            Some(src) => {
                print!("{src}");
                Ok(true)
            }
            None => Err(anyhow::anyhow!("unknown preset {n:?}")),
        },
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
