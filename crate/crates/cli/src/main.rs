use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use scoremap::scalarize::ScalarizerKind;

use scoremap_cli::commands;
use scoremap_cli::config::{ConfigError, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "scoremap",
    version,
    about = "Score-based multi-objective optimization pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed; stage seeds become seed, seed+1, ...
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overwrite existing artifacts.
    #[arg(long, global = true)]
    force: bool,

    /// Scalarizer for every stage that solves preferences.
    #[arg(long, global = true, value_parser = ["raw", "score"])]
    scalarizer: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Draw uniform decision vectors.
    Sample,
    /// Build the score transform.
    Ecdf,
    /// Solve random preferences into a front archive.
    Front,
    /// Rank efficient records by total score.
    Order,
    /// Train the preference correction model and compare methods on held-out records.
    Correct,
    /// Compare the methods on fresh desired trade-offs.
    Evaluate,
    /// Trade-off densities, homogeneity grid and the feasibility probe.
    Analyze,
    /// Re-check the manifest checksums.
    Verify,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| ConfigError(format!("reading {}: {e}", path.display())))?;
            RunConfig::from_toml_str(&text)?
        }
        None => RunConfig::default(),
    };
    let scalarizer = cli
        .scalarizer
        .as_deref()
        .map(str::parse::<ScalarizerKind>)
        .transpose()
        .map_err(|e| ConfigError(e.to_string()))?;
    cfg.apply(&Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        scalarizer,
    })?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(ConfigError("--jobs must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker pool")?;
    }
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Sample => commands::sample(cfg, cli.force),
        Command::Ecdf => commands::ecdf(cfg, cli.force),
        Command::Front => commands::front(cfg, cli.force),
        Command::Order => commands::order(cfg, cli.force),
        Command::Correct => commands::correct(cfg, cli.force),
        Command::Evaluate => commands::evaluate(cfg, cli.force),
        Command::Analyze => commands::analyze(cfg, cli.force),
        Command::Verify => {
            let bad = commands::verify(&cfg.out)?;
            if bad.is_empty() {
                println!("all artifacts match {}", cfg.out.join("manifest.json").display());
                Ok(())
            } else {
                for name in &bad {
                    eprintln!("checksum mismatch: {name}");
                }
                anyhow::bail!("{} artifact(s) failed verification", bad.len())
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(scoremap_cli::exit_code(&e) as u8)
        }
    }
}
