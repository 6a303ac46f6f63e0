use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod manifest;

use commands::CliError;
use manifest::{OutputDir, MANIFEST};

#[derive(Parser, Debug)]
#[command(name = "pslab", version, about = "Pseudospectra, quasimodes and random perturbations of non-self-adjoint operators")]
struct Cli {
    /// TOML run configuration; a manifest.toml from an earlier run also works.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, env = "PSLAB_WORKERS")]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override a config key, e.g. `--set weyl_mc.trials=5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Smallest singular value of z - P_h over a grid, with level contours.
    Pseudospec,
    /// WKB quasimode residuals over a list of h.
    Quasimode,
    /// Singular pair and effective function over a grid.
    GrushinMap,
    /// d-bar identity of the effective function and the symplectic density.
    DbarCheck,
    /// Eigenvalue counts of randomly perturbed operators against the Weyl law.
    WeylMc,
    /// Weyl-law demo for a 2D torus operator.
    #[command(name = "weyl-2d")]
    Weyl2d,
    /// Argument-principle zero count of a polynomial fixture.
    ZeroCount,
    /// Zero counting against the Laplacian mass on the lattice family.
    HagerVerify,
    /// Resolvent norms of the rotated oscillator.
    ResolventScan,
    /// Semiclassical rescaling identity for the rotated oscillator.
    RescaleCheck,
    /// Monte Carlo check of the Gaussian tail bound.
    TailBoundMc,
    /// Rerun the run recorded in DIR/manifest.toml into --out and compare hashes.
    Replay { dir: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Pseudospec => "pseudospec",
            Command::Quasimode => "quasimode",
            Command::GrushinMap => "grushin-map",
            Command::DbarCheck => "dbar-check",
            Command::WeylMc => "weyl-mc",
            Command::Weyl2d => "weyl-2d",
            Command::ZeroCount => "zero-count",
            Command::HagerVerify => "hager-verify",
            Command::ResolventScan => "resolvent-scan",
            Command::RescaleCheck => "rescale-check",
            Command::TailBoundMc => "tail-bound-mc",
            Command::Replay { .. } => "replay",
        }
    }
}

fn execute(subcommand: &str, config: Option<&Path>, seed: Option<u64>, set: &[String], out: &Path) -> Result<(), CliError> {
    let section = commands::section_of(subcommand).ok_or_else(|| CliError::Config(format!("unknown subcommand '{subcommand}'")))?;
    let cfg = config::load(config, set)?;
    let master = seed.or(cfg.seed).unwrap_or(0);
    if master > i64::MAX as u64 {
        return Err(CliError::Config(format!("seed {master} does not fit a TOML integer")));
    }
    let mut dir = OutputDir::create(out)?;
    let resolved = commands::run(subcommand, &cfg, master, &mut dir)?;
    let text = manifest::render(subcommand, section, master, resolved, &dir.artifacts()?);
    manifest::write_manifest(&dir, &text)?;
    Ok(())
}

fn replay(dir: &Path, out: &Path) -> Result<(), CliError> {
    if dir == out {
        return Err(CliError::Config("replay needs an --out different from the recorded directory".into()));
    }
    let path = dir.join(MANIFEST);
    let recorded = config::load(Some(&path), &[])?;
    let sub = recorded
        .subcommand
        .clone()
        .ok_or_else(|| CliError::Config(format!("{}: no subcommand recorded", path.display())))?;
    execute(&sub, Some(&path), None, &[], out)?;
    let mut bad = Vec::new();
    for a in &recorded.artifacts {
        let now = manifest::sha256_file(&out.join(&a.path))?;
        if now != a.sha256 {
            bad.push(a.path.clone());
        }
    }
    if !bad.is_empty() {
        return Err(CliError::Mismatch(bad.join(", ")));
    }
    println!("replay of {sub}: {} artifacts identical", recorded.artifacts.len());
    Ok(())
}

fn main() -> ExitCode {
    // usage errors are configuration errors: exit 1, not clap's 2
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the worker pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Replay { dir } => replay(dir, &cli.out),
        cmd => execute(cmd.name(), cli.config.as_deref(), cli.seed, &cli.set, &cli.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
