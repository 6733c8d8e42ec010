mod artifacts;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use artifacts::Artifacts;
use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "fk", version, about = "Driven Frenkel-Kontorova chain toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; defaults apply to omitted keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one key, e.g. `--set forcing.value=0.2` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Master seed; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides the config value.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Integrate one chain and classify its asymptotics.
    Simulate,
    /// Track the zero set of a seeded pair and audit the balance.
    ZeroAudit,
    /// Evolve two ensembles and record the intersection functional.
    Measure,
    /// Construct an ordered invariant measure with rotation number p/q.
    Am,
    /// Sweep the DC force and classify each point.
    Depin,
    /// Fraction of time an ensemble spends near its equilibria.
    Residence,
    /// Merge and verify the command manifests in the output directory.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::ZeroAudit => "zero-audit",
            Command::Measure => "measure",
            Command::Am => "am",
            Command::Depin => "depin",
            Command::Residence => "residence",
            Command::Report => "report",
        }
    }
}

fn run(cli: &Cli) -> Result<Option<String>, CliError> {
    let mut overrides = cli.set.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(out) = &cli.out {
        overrides.push(format!("output={}", serde_json::Value::String(out.display().to_string())));
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let dir = PathBuf::from(&cfg.output);
    if let Command::Report = cli.command {
        return commands::report(&cfg, &dir);
    }
    let mut art = Artifacts::create(&dir, cli.command.name(), &cfg)?;
    art.write_json("config.json", &cfg)?;
    let outcome = match cli.command {
        Command::Simulate => commands::simulate(&cfg, &mut art),
        Command::ZeroAudit => commands::zero_audit(&cfg, &mut art),
        Command::Measure => commands::measure(&cfg, &mut art),
        Command::Am => commands::am(&cfg, &mut art),
        Command::Depin => commands::depin(&cfg, &mut art),
        Command::Residence => commands::residence(&cfg, &mut art),
        Command::Report => unreachable!("handled above"),
    }?;
    let manifest = art.finish()?;
    eprintln!("{}: wrote {} files to {}", manifest.command, manifest.files.len(), dir.display());
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(audit)) => {
            eprintln!("error: {}", CliError::Audit(audit));
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
