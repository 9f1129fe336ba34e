//! Batch driver for the suspension toolkit: one subcommand per pipeline
//! stage, file-based handoff between stages, and a manifest per run.

mod commands;
mod config;
mod manifest;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use manifest::Manifest;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "stokeshom", version, about = "Effective viscosity of rigid suspensions")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed list override.
    #[arg(long, global = true, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Grid resolution override.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Penalization ladder override.
    #[arg(long, global = true, value_delimiter = ',')]
    kappa_ladder: Option<Vec<f64>>,
    /// Scale-separation ladder override.
    #[arg(long, global = true, value_delimiter = ',')]
    eps_ladder: Option<Vec<f64>>,
    /// Spatial dimension override.
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true, hide = true)]
    inject_failure: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate particle realizations.
    Gen,
    /// Interparticle gap statistics of generated realizations.
    Gaps,
    /// Fit cutoff-field norm scaling exponents against the branch table.
    CutoffVerify,
    /// Solve the periodic cell problems and dump the flow fields.
    Cell,
    /// Effective viscosity and effective constant per seed.
    Effective,
    /// Two-scale convergence study over a scale ladder.
    Homogenize,
}

fn resolve(cli: &Cli) -> Result<(Option<String>, config::Resolved)> {
    let text = match &cli.config {
        Some(path) => Some(
            std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?,
        ),
        None => None,
    };
    let mut resolved = config::validate(text.as_deref().unwrap_or(""))?;
    if let Some(seeds) = &cli.seed {
        resolved.seeds = seeds.clone();
    }
    if let Some(n) = cli.grid {
        resolved.grid_n = n;
    }
    if let Some(ladder) = &cli.kappa_ladder {
        resolved.kappa_ladder = ladder.clone();
    }
    if let Some(ladder) = &cli.eps_ladder {
        resolved.eps_ladder = ladder.clone();
    }
    if let Some(d) = cli.dim {
        resolved.dim = d;
        if cli.grid.is_none() {
            resolved.grid_n = if d == 3 { 64 } else { 256 };
        }
    }
    // Re-check so flag overrides obey the same schema as config keys.
    let resolved = config::validate(&config::emit(&resolved))?;
    Ok((text, resolved))
}

fn run(cli: &Cli) -> Result<bool> {
    let (text, resolved) = resolve(cli)?;
    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating {}", cli.out.display()))?;
    let mut manifest = Manifest::new(text.as_deref(), resolved.clone());
    match cli.cmd {
        Cmd::Gen => commands::gen(&resolved, &cli.out, &mut manifest),
        Cmd::Gaps => commands::gaps(&resolved, &cli.out, &mut manifest),
        Cmd::CutoffVerify => commands::cutoff_verify(&resolved, &cli.out, &mut manifest),
        Cmd::Cell => commands::cell(&resolved, &cli.out, &mut manifest),
        Cmd::Effective => {
            commands::effective(&resolved, &cli.out, &mut manifest, cli.inject_failure)
        }
        Cmd::Homogenize => commands::homogenize(&resolved, &cli.out, &mut manifest),
    }
    for step in &manifest.steps {
        if step.status == "ok" {
            eprintln!("[ok] {}", step.name);
        } else {
            eprintln!("[FAIL] {}: {}", step.name, step.status);
        }
    }
    manifest.write(&cli.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
