use std::path::PathBuf;
use std::process::ExitCode;

use cavity_bec::scenario::{parse_config, run_scenario, Engine, RunSummary};
use cavity_bec::Error;
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Scenario runner for the cavity-BEC simulator.
///
/// Set BEC_CAVITY_THREADS to cap the number of worker threads.
#[derive(Debug, Parser)]
#[command(name = "cavity-bec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the scenario described by a JSON config file.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output.dir` (default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Engine override for the time-domain scenarios.
        #[arg(long, value_enum)]
        engine: Option<EngineArg>,
        /// Print nothing on success.
        #[arg(long)]
        quiet: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EngineArg {
    Dma,
    Gp,
    Both,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Dma => Engine::Dma,
            EngineArg::Gp => Engine::Gp,
            EngineArg::Both => Engine::Both,
        }
    }
}

fn print_summary(s: &RunSummary, dir: &std::path::Path) {
    println!("scenario {} finished in {:.3} s", s.scenario, s.wall_time_s);
    for (k, v) in &s.scalars {
        println!("  {k} = {v}");
    }
    for f in &s.files {
        println!(
            "  wrote {} ({} bytes, sha256 {})",
            dir.join(&f.path).display(),
            f.bytes,
            f.sha256
        );
    }
}

fn run(config: PathBuf, out: Option<PathBuf>, engine: Option<EngineArg>, quiet: bool) -> Result<(), Error> {
    let text = std::fs::read_to_string(&config).map_err(|e| Error::Config {
        field: "<file>".into(),
        reason: format!("cannot read {}: {e}", config.display()),
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(e) = engine {
        cfg = cfg.with_engine(e.into());
    }
    let dir = out
        .or_else(|| cfg.config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let summary = run_scenario(&cfg, &dir)?;
    if !quiet {
        print_summary(&summary, &dir);
    }
    Ok(())
}

fn main() -> ExitCode {
    let Command::Run {
        config,
        out,
        engine,
        quiet,
    } = Cli::parse().command;
    match run(config, out, engine, quiet) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            })
        }
    }
}
