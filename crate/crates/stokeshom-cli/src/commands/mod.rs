//! Pipeline stages. Each stage reads its inputs from the output directory (or
//! generates them from the resolved parameters), writes its artifacts there,
//! and records per-step status in the manifest.

use crate::config::Resolved;
use crate::manifest::Manifest;
use anyhow::{anyhow, Context, Result};
use std::path::{Path, PathBuf};
use stokeshom::cutoff::{exponent_regression, log_grid, NormKind};
use stokeshom::effective::analyze_config;
use stokeshom::ensemble::{
    generate_rsa, rho_refined, Domain, DistributionLaw, GapSampling, ParticleConfig, RsaParams,
    RsaTarget,
};
use stokeshom::homogenize::{convergence_table, EpsExperiment, ForceExpr};
use stokeshom::report;
use stokeshom::stokes::{BoundaryKind, Grid, SolverParams, ViscosityField};

fn rsa_params(cfg: &Resolved, seed: u64) -> RsaParams {
    let target = match cfg.count {
        Some(n) => RsaTarget::Count(n),
        None => RsaTarget::Fraction(cfg.phi),
    };
    let mut p = RsaParams::new(seed, cfg.dim, cfg.box_side, target);
    p.radius_law = match cfg.radius_max {
        Some(hi) => DistributionLaw::Uniform { lo: cfg.radius, hi },
        None => DistributionLaw::Fixed(cfg.radius),
    };
    p.min_gap_law = DistributionLaw::Fixed(cfg.min_gap);
    p.delta = cfg.delta;
    p
}

fn particles_path(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("particles_seed{seed}.csv"))
}

/// Reads a previously generated realization; falls back to generating it so
/// every stage is independently runnable.
fn load_or_generate(cfg: &Resolved, out: &Path, seed: u64) -> Result<ParticleConfig> {
    let path = particles_path(out, seed);
    if path.exists() {
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        let domain = Domain::Periodic { side: cfg.box_side };
        report::parse_particles_csv(&text, domain, cfg.delta, seed)
            .map_err(|e| anyhow!("{}: {e}", path.display()))
    } else {
        Ok(generate_rsa(&rsa_params(cfg, seed))?)
    }
}

fn write_artifact(manifest: &mut Manifest, path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    manifest.artifact(path);
    Ok(())
}

pub fn gen(cfg: &Resolved, out: &Path, manifest: &mut Manifest) {
    for &seed in &cfg.seeds {
        let step = format!("gen seed {seed}");
        let mut run = || -> Result<()> {
            let config = generate_rsa(&rsa_params(cfg, seed))?;
            let csv = report::particles_csv(&config);
            write_artifact(manifest, &particles_path(out, seed), csv.as_bytes())
        };
        match run() {
            Ok(()) => manifest.step_ok(step),
            Err(e) => manifest.step_failed(step, &format!("{e:#}")),
        }
    }
}

pub fn gaps(cfg: &Resolved, out: &Path, manifest: &mut Manifest) {
    let sampling = GapSampling::default_for_dim(cfg.dim);
    for &seed in &cfg.seeds {
        let step = format!("gaps seed {seed}");
        let mut run = || -> Result<()> {
            let config = load_or_generate(cfg, out, seed)?;
            let records = (0..config.particles.len())
                .map(|n| rho_refined(&config, n, &sampling))
                .collect::<Result<Vec<_>, _>>()?;
            let csv = report::gaps_csv(&records);
            write_artifact(manifest, &out.join(format!("gaps_seed{seed}.csv")), csv.as_bytes())
        };
        match run() {
            Ok(()) => manifest.step_ok(step),
            Err(e) => manifest.step_failed(step, &format!("{e:#}")),
        }
    }
}

fn parse_kind(label: &str) -> Result<NormKind> {
    match label {
        "grad_w" => Ok(NormKind::GradW),
        "hess_w" => Ok(NormKind::HessW),
        "weighted_hess_w" => Ok(NormKind::WeightedHess),
        other => Err(anyhow!("unknown norm kind {other}")),
    }
}

pub fn cutoff_verify(cfg: &Resolved, out: &Path, manifest: &mut Manifest) {
    let step = "cutoff-verify";
    let mut run = || -> Result<()> {
        let rho_grid = log_grid(cfg.rho_max, cfg.rho_min, cfg.rho_count);
        let mut reports = Vec::new();
        for label in &cfg.kinds {
            let kind = parse_kind(label)?;
            reports.extend(exponent_regression(
                &cfg.dims,
                &cfg.rs,
                kind,
                &rho_grid,
                cfg.resolution,
            )?);
        }
        let csv = report::scaling_csv(&reports);
        write_artifact(manifest, &out.join("scaling.csv"), csv.as_bytes())?;
        let summary = serde_json::to_string_pretty(&report::scaling_summary(&reports))?;
        write_artifact(manifest, &out.join("scaling_summary.json"), summary.as_bytes())
    };
    match run() {
        Ok(()) => manifest.step_ok(step),
        Err(e) => manifest.step_failed(step, &format!("{e:#}")),
    }
}

pub fn cell(cfg: &Resolved, out: &Path, manifest: &mut Manifest) {
    let kappa = *cfg.kappa_ladder.last().expect("validated nonempty");
    for &seed in &cfg.seeds {
        let step = format!("cell seed {seed}");
        let mut run = || -> Result<()> {
            let config = load_or_generate(cfg, out, seed)?;
            let grid = Grid::new(cfg.dim, cfg.grid_n, cfg.box_side, BoundaryKind::Periodic)?;
            let chi = stokeshom::stokes::rasterize(&config, &grid)?;
            let mu = ViscosityField::new(grid, chi, kappa)?;
            let mut params = SolverParams::new(kappa);
            params.tol_mom = cfg.tol;
            params.tol_div = cfg.tol;
            params.max_iter = cfg.max_iter;
            let solutions = stokeshom::effective::solve_basis(&mu, &params)?;
            for (a, sol) in solutions.iter().enumerate() {
                for (c, comp) in sol.state.velocity.iter().enumerate() {
                    let path = out.join(format!("cell_seed{seed}_e{a}_u{c}.f64"));
                    write_artifact(manifest, &path, &report::field_bytes(comp))?;
                    let sidecar =
                        report::FieldSidecar::for_grid(&grid, grid.dims()[..grid.dim].to_vec());
                    let meta = serde_json::to_string_pretty(&sidecar)?;
                    write_artifact(
                        manifest,
                        &out.join(format!("cell_seed{seed}_e{a}_u{c}.json")),
                        meta.as_bytes(),
                    )?;
                }
                let path = out.join(format!("cell_seed{seed}_e{a}_p.f64"));
                write_artifact(manifest, &path, &report::field_bytes(&sol.state.pressure))?;
                if grid.dim == 2 {
                    let slice = report::slice_csv(
                        &sol.state.pressure,
                        &grid.dims()[..2],
                        grid.h,
                        0,
                        &[grid.n / 2],
                    )
                    .map_err(|e| anyhow!(e))?;
                    write_artifact(
                        manifest,
                        &out.join(format!("cell_seed{seed}_e{a}_p_midline.csv")),
                        slice.as_bytes(),
                    )?;
                }
            }
            let residuals: Vec<_> = solutions
                .iter()
                .map(|s| {
                    serde_json::json!({
                        "residual_mom": s.state.residual_mom,
                        "residual_div": s.state.residual_div,
                        "iterations": s.state.iterations,
                    })
                })
                .collect();
            let summary = serde_json::to_string_pretty(&serde_json::json!({
                "seed": seed,
                "kappa": kappa,
                "solves": residuals,
            }))?;
            write_artifact(manifest, &out.join(format!("cell_seed{seed}.json")), summary.as_bytes())
        };
        match run() {
            Ok(()) => manifest.step_ok(step),
            Err(e) => manifest.step_failed(step, &format!("{e:#}")),
        }
    }
}

fn thread_cap() -> usize {
    std::env::var("STOKESHOM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn effective(cfg: &Resolved, out: &Path, manifest: &mut Manifest, inject_failure: bool) {
    let grid = match Grid::new(cfg.dim, cfg.grid_n, cfg.box_side, BoundaryKind::Periodic) {
        Ok(g) => g,
        Err(e) => {
            manifest.step_failed("effective", &e.to_string());
            return;
        }
    };
    let cap = thread_cap();
    let mut results: Vec<(u64, Result<report::EffectiveDoc>)> = Vec::new();
    for chunk in cfg.seeds.chunks(cap.max(1)) {
        let batch: Vec<(u64, Result<report::EffectiveDoc>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .enumerate()
                .map(|(k, &seed)| {
                    let absolute = results.len() + k;
                    scope.spawn(move || {
                        if inject_failure && absolute == 1 {
                            return (seed, Err(anyhow!("injected solver failure")));
                        }
                        let run = || -> Result<report::EffectiveDoc> {
                            let config = load_or_generate(cfg, out, seed)?;
                            let result =
                                analyze_config(&config, &grid, &cfg.kappa_ladder, cfg.tol)?;
                            Ok(report::effective_doc(seed, &cfg.kappa_ladder, &result))
                        };
                        (seed, run())
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        results.extend(batch);
    }

    let mut rows = String::new();
    let mut wrote_header = false;
    for (seed, outcome) in results {
        let step = format!("effective seed {seed}");
        match outcome {
            Ok(doc) => {
                let mut run = || -> Result<()> {
                    let json = serde_json::to_string_pretty(&doc)?;
                    write_artifact(
                        manifest,
                        &out.join(format!("effective_seed{seed}.json")),
                        json.as_bytes(),
                    )
                };
                if !wrote_header {
                    rows.push_str("seed,lambda");
                    let k = doc.b_matrix.len();
                    for i in 0..k {
                        for j in 0..k {
                            rows.push_str(&format!(",B_{}{}", i + 1, j + 1));
                        }
                    }
                    for i in 0..doc.b_vector.len() {
                        rows.push_str(&format!(",b_{}", i + 1));
                    }
                    rows.push_str(",monotone\n");
                    wrote_header = true;
                }
                rows.push_str(&format!("{},{}", doc.seed, doc.lambda));
                for row in &doc.b_matrix {
                    for v in row {
                        rows.push_str(&format!(",{v}"));
                    }
                }
                for v in &doc.b_vector {
                    rows.push_str(&format!(",{v}"));
                }
                rows.push_str(&format!(",{}\n", doc.monotone));
                match run() {
                    Ok(()) => manifest.step_ok(step),
                    Err(e) => manifest.step_failed(step, &format!("{e:#}")),
                }
            }
            Err(e) => manifest.step_failed(step, &format!("{e:#}")),
        }
    }
    if wrote_header {
        match write_artifact(manifest, &out.join("effective.csv"), rows.as_bytes()) {
            Ok(()) => manifest.step_ok("effective aggregate"),
            Err(e) => manifest.step_failed("effective aggregate", &format!("{e:#}")),
        }
    }
}

pub fn homogenize(cfg: &Resolved, out: &Path, manifest: &mut Manifest) {
    let step = "homogenize";
    let mut run = || -> Result<()> {
        let seed = cfg.seeds[0];
        let master = load_or_generate(cfg, out, seed)?;
        let eps0 = cfg.eps_ladder[0];
        let grid_n = cfg
            .eps_ladder
            .iter()
            .map(|&e| {
                let n = (cfg.grid_n as f64 * eps0 / e).round() as usize;
                n.max(16)
            })
            .collect();
        let force = match cfg.force.as_str() {
            "rotor" => ForceExpr::Rotor { amplitude: cfg.force_amplitude },
            _ => ForceExpr::SineShear { amplitude: cfg.force_amplitude },
        };
        let exp = EpsExperiment {
            master,
            eps_ladder: cfg.eps_ladder.clone(),
            grid_n,
            cell_n: cfg.cell_n,
            kappa: cfg.kappa,
            force,
            tol: cfg.tol,
        };
        let table = convergence_table(&exp)?;
        write_artifact(manifest, &out.join("hom.csv"), report::hom_csv(&table).as_bytes())?;
        let json = serde_json::to_string_pretty(&table)?;
        write_artifact(manifest, &out.join("hom.json"), json.as_bytes())?;
        if !table.failures.is_empty() {
            let listed: Vec<String> =
                table.failures.iter().map(|(e, msg)| format!("eps {e}: {msg}")).collect();
            return Err(anyhow!("{} scale(s) failed: {}", listed.len(), listed.join("; ")));
        }
        Ok(())
    };
    match run() {
        Ok(()) => manifest.step_ok(step),
        Err(e) => manifest.step_failed(step, &format!("{e:#}")),
    }
}
