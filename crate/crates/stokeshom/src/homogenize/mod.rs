//! The eps-scaling experiment: solve the suspension problem in the unit
//! square for a ladder of scale ratios eps, solve the homogenized
//! constant-tensor problem with the measured effective viscosity, and report
//! two-scale expansion errors for velocity and pressure.
//!
//! The heterogeneous configuration at scale eps is the periodic master
//! realization tiled over the blown-up domain U/eps and rescaled; this single
//! periodized realization stands in for fresh stationary samples, the usual
//! representative-volume surrogate for the ergodic limit. Particle selection
//! near the boundary uses strict clearance delta in blown-up coordinates (the
//! lower set of the selection sandwich), a documented choice.
//!
//! Desk-scale runs use d = 2. The pressure error is measured in L^{3/2} over
//! the fluid region, substituting for L^{2d/(d+2)} which degenerates at
//! d = 2; the inverse-gap moment statistic likewise uses the exponent
//! gamma = 3/2 in 2D.

use crate::effective::{strain_basis, CellSolution, EffectiveConstant, EffectiveError, EffectiveTensor};
use crate::ensemble::{
    moment_statistic, rho_refined, Domain, EnsembleError, GapRecord, GapSampling, Particle,
    ParticleConfig,
};
use crate::geom::KahanSum;
use crate::stokes::dirichlet::{
    comp_dims, diag_strains, face_force, face_position, node_shear, solve_dirichlet,
    solve_homogenized as solve_aniso, zero_velocity,
};
use crate::stokes::periodic::interp_periodic;
use crate::stokes::visc::rasterize;
use crate::stokes::{BoundaryKind, FlowState, Grid, SolverParams, StokesError, ViscosityField};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HomogenizeError {
    #[error(transparent)]
    Stokes(#[from] StokesError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Effective(#[from] EffectiveError),
    #[error("incommensurate grids: {0}")]
    IncommensurateGrids(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Analytic force descriptors; all smooth, as the corrector theory wants an
/// integrability exponent above the dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ForceExpr {
    /// f = amplitude (y - 1/2, 1/2 - x): a constant-curl rotor.
    Rotor { amplitude: f64 },
    /// f = amplitude (sin(pi y), sin(pi x)).
    SineShear { amplitude: f64 },
}

impl ForceExpr {
    pub fn eval(&self, x: [f64; 3]) -> [f64; 2] {
        match *self {
            ForceExpr::Rotor { amplitude } => {
                [amplitude * (x[1] - 0.5), amplitude * (0.5 - x[0])]
            }
            ForceExpr::SineShear { amplitude } => [
                amplitude * (std::f64::consts::PI * x[1]).sin(),
                amplitude * (std::f64::consts::PI * x[0]).sin(),
            ],
        }
    }
}

/// The eps-scaling experiment specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsExperiment {
    /// Periodic master realization (side L, unit-scale particles).
    pub master: ParticleConfig,
    /// Strictly decreasing; each 1/eps must be a multiple of the master side.
    pub eps_ladder: Vec<f64>,
    /// Domain grid resolution per eps (same length as the ladder).
    pub grid_n: Vec<usize>,
    /// Resolution of the periodic cell solves on the master box.
    pub cell_n: usize,
    pub kappa: f64,
    pub force: ForceExpr,
    pub tol: f64,
}

impl EpsExperiment {
    pub fn validate(&self) -> Result<(), HomogenizeError> {
        self.master.validate()?;
        if !self.master.domain.is_periodic() {
            return Err(HomogenizeError::InvalidParameter(
                "master configuration must be periodic".into(),
            ));
        }
        if self.eps_ladder.is_empty() || self.eps_ladder.len() != self.grid_n.len() {
            return Err(HomogenizeError::InvalidParameter(
                "eps ladder and grid resolutions must be nonempty and equal length".into(),
            ));
        }
        for w in self.eps_ladder.windows(2) {
            if !(w[1] < w[0]) {
                return Err(HomogenizeError::InvalidParameter(
                    "eps ladder must be strictly decreasing".into(),
                ));
            }
        }
        for (&eps, &n) in self.eps_ladder.iter().zip(&self.grid_n) {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(HomogenizeError::InvalidParameter(format!(
                    "eps = {eps} outside (0, 1]"
                )));
            }
            let h = 1.0 / n as f64;
            let r_min = self
                .master
                .particles
                .iter()
                .map(|p| p.radius)
                .fold(f64::INFINITY, f64::min);
            if r_min.is_finite() && eps * r_min < 2.0 * h {
                return Err(HomogenizeError::InvalidParameter(format!(
                    "eps = {eps}: scaled radius {} under-resolved at N = {n}",
                    eps * r_min
                )));
            }
        }
        Ok(())
    }
}

/// Tile the periodic master realization over the blown-up domain [0, 1/eps]^d
/// as a bounded configuration. 1/eps must be an integer multiple of the
/// master side.
pub fn tile_master(master: &ParticleConfig, eps: f64) -> Result<ParticleConfig, HomogenizeError> {
    let side = master.domain.side();
    let blow = 1.0 / eps;
    let copies = blow / side;
    let m = copies.round();
    if (copies - m).abs() > 1e-9 || m < 1.0 {
        return Err(HomogenizeError::IncommensurateGrids(format!(
            "1/eps = {blow} is not an integer multiple of the master side {side}"
        )));
    }
    let m = m as usize;
    let mut particles = Vec::with_capacity(master.particles.len() * m * m);
    let zm = if master.dim == 3 { m } else { 1 };
    for bz in 0..zm {
        for by in 0..m {
            for bx in 0..m {
                for p in &master.particles {
                    let mut c = p.center;
                    c[0] += bx as f64 * side;
                    c[1] += by as f64 * side;
                    if master.dim == 3 {
                        c[2] += bz as f64 * side;
                    }
                    particles.push(Particle { center: c, radius: p.radius });
                }
            }
        }
    }
    Ok(ParticleConfig {
        dim: master.dim,
        domain: Domain::Bounded { side: blow },
        particles,
        delta: master.delta,
        seed: master.seed,
    })
}

/// Lower-sandwich selection in blown-up coordinates: particles fully inside
/// the box with clearance at least delta from the boundary.
pub fn select_particles(tiled: &ParticleConfig) -> Vec<usize> {
    crate::ensemble::select_particles(tiled)
}

/// The heterogeneous configuration in domain coordinates: selected particles
/// of the tiling, rescaled by eps into the unit box.
pub fn hetero_config(master: &ParticleConfig, eps: f64) -> Result<ParticleConfig, HomogenizeError> {
    let tiled = tile_master(master, eps)?;
    let selected = select_particles(&tiled);
    let particles = selected
        .iter()
        .map(|&n| {
            let p = &tiled.particles[n];
            let mut c = [0.0; 3];
            for i in 0..master.dim {
                c[i] = p.center[i] * eps;
            }
            Particle { center: c, radius: p.radius * eps }
        })
        .collect();
    Ok(ParticleConfig {
        dim: master.dim,
        domain: Domain::Bounded { side: 1.0 },
        particles,
        delta: master.delta * eps,
        seed: master.seed,
    })
}

/// Homogenized solve wrapper: -div(2 B D(u)) + grad S = (1 - lambda) f.
pub fn solve_homogenized(
    bbar: &EffectiveTensor,
    lambda: f64,
    force: &ForceExpr,
    grid: Grid,
    params: &SolverParams,
) -> Result<FlowState, HomogenizeError> {
    if bbar.dim != 2 || bbar.matrix.len() != 2 {
        return Err(HomogenizeError::InvalidParameter(
            "homogenized solves are implemented for d = 2".into(),
        ));
    }
    let b = [
        [bbar.matrix[0][0], 0.5 * (bbar.matrix[0][1] + bbar.matrix[1][0])],
        [0.5 * (bbar.matrix[0][1] + bbar.matrix[1][0]), bbar.matrix[1][1]],
    ];
    let f = face_force(&grid, |x| force.eval(x));
    Ok(solve_aniso(grid, b, &f, 1.0 - lambda, params)?)
}

/// Clamped bilinear interpolation on a bounded lattice; `off` is the per-axis
/// position offset in units of h (0.5 cell-centered, 0.0 node-aligned).
fn interp_bounded(field: &[f64], nx: usize, ny: usize, h: f64, off: [f64; 2], x: [f64; 3]) -> f64 {
    let mut base = [0usize; 2];
    let mut frac = [0.0; 2];
    for (axis, n) in [(0usize, nx), (1usize, ny)] {
        let t = x[axis] / h - off[axis];
        let lo = t.floor();
        let b = (lo.max(0.0) as usize).min(n.saturating_sub(2));
        base[axis] = b;
        frac[axis] = (t - b as f64).clamp(0.0, 1.0);
    }
    let v00 = field[base[0] + nx * base[1]];
    let v10 = field[base[0] + 1 + nx * base[1]];
    let v01 = field[base[0] + nx * (base[1] + 1)];
    let v11 = field[base[0] + 1 + nx * (base[1] + 1)];
    v00 * (1.0 - frac[0]) * (1.0 - frac[1])
        + v10 * frac[0] * (1.0 - frac[1])
        + v01 * (1.0 - frac[0]) * frac[1]
        + v11 * frac[0] * frac[1]
}

/// Strain coordinates of the homogenized flow, sampled anywhere in U:
/// g_1 = (Dxx - Dyy)/sqrt2 from cells, g_2 = sqrt2 Dxy from nodes.
struct StrainCoords {
    n: usize,
    h: f64,
    p1: Vec<f64>,
    dxy: Vec<f64>,
}

impl StrainCoords {
    fn new(ubar: &FlowState) -> Self {
        let n = ubar.grid.n;
        let h = ubar.grid.h;
        let (dxx, dyy) = diag_strains(n, h, &ubar.velocity);
        let dxy = node_shear(n, h, &ubar.velocity);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p1 = dxx.iter().zip(&dyy).map(|(a, b)| (a - b) * s).collect();
        StrainCoords { n, h, p1, dxy }
    }

    fn eval(&self, x: [f64; 3]) -> [f64; 2] {
        let g1 = interp_bounded(&self.p1, self.n, self.n, self.h, [0.5, 0.5], x);
        let g2 = std::f64::consts::SQRT_2
            * interp_bounded(&self.dxy, self.n + 1, self.n + 1, self.h, [0.0, 0.0], x);
        [g1, g2]
    }
}

/// One row of the convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomReportRow {
    pub eps: f64,
    pub h: f64,
    pub err_l2: f64,
    pub err_h1_naive: f64,
    pub err_h1_corrected: f64,
    pub err_pressure: f64,
    pub moment_stat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomReport {
    pub lambda: f64,
    pub kappa: f64,
    pub rows: Vec<HomReportRow>,
    pub failures: Vec<(f64, String)>,
}

fn l2_norm_faces(grid: &Grid, u: &[Vec<f64>]) -> f64 {
    let mut acc = KahanSum::default();
    for c in u {
        for v in c {
            acc.add(v * v);
        }
    }
    (acc.value() * grid.h * grid.h).sqrt()
}

/// Strain-based H1 norm sqrt(||v||^2 + 2 ||D(v)||^2) of a no-slip staggered
/// field (Korn makes this equivalent to the full H1 norm on H1_0).
fn h1_norm_faces(grid: &Grid, u: &[Vec<f64>]) -> f64 {
    let n = grid.n;
    let h = grid.h;
    let (dxx, dyy) = diag_strains(n, h, u);
    let dxy = node_shear(n, h, u);
    let mut acc = KahanSum::default();
    for c in 0..n * n {
        acc.add(2.0 * (dxx[c] * dxx[c] + dyy[c] * dyy[c]));
    }
    for d in &dxy {
        acc.add(4.0 * d * d);
    }
    let strain2 = acc.value() * h * h;
    let l2 = l2_norm_faces(grid, u);
    (l2 * l2 + strain2).sqrt()
}

fn sub_fields(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u - v).collect())
        .collect()
}

/// Two-scale expansion of the homogenized flow on the fine staggered grid:
/// ubar + sum_a eps psi_a(x / eps) (E_a : D(ubar))(x).
pub fn two_scale_velocity(
    ubar: &FlowState,
    cell: &[CellSolution],
    master_grid: &Grid,
    eps: f64,
) -> Result<Vec<Vec<f64>>, HomogenizeError> {
    let grid = ubar.grid;
    let n = grid.n;
    let basis = strain_basis(2);
    if cell.len() != basis.len() {
        return Err(HomogenizeError::InvalidParameter(format!(
            "expected {} cell solutions, got {}",
            basis.len(),
            cell.len()
        )));
    }
    let coords = StrainCoords::new(ubar);
    let mut out = zero_velocity(n);
    for comp in 0..2 {
        let (nx, ny) = comp_dims(n, comp);
        let mut off = [0.5, 0.5, 0.5];
        off[comp] = 1.0;
        for j in 0..ny {
            for i in 0..nx {
                let x = face_position(&grid, comp, i, j);
                let g = coords.eval(x);
                let y = [x[0] / eps, x[1] / eps, 0.0];
                let mut v = ubar.velocity[comp][i + nx * j];
                for (a, sol) in cell.iter().enumerate() {
                    let psi = interp_periodic(master_grid, &sol.state.velocity[comp], off, y);
                    v += eps * psi * g[a];
                }
                out[comp][i + nx * j] = v;
            }
        }
    }
    Ok(out)
}

/// Velocity and pressure errors of the two-scale expansion at one eps.
/// Requires u_eps and ubar on the same grid.
pub fn two_scale_error(
    u_eps: &FlowState,
    ubar: &FlowState,
    cell: &[CellSolution],
    bbar_constant: &EffectiveConstant,
    master_grid: &Grid,
    eps: f64,
    fluid_chi: &[f64],
) -> Result<(f64, f64, f64, f64), HomogenizeError> {
    if u_eps.grid != ubar.grid {
        return Err(HomogenizeError::IncommensurateGrids(format!(
            "heterogeneous grid N = {} differs from homogenized N = {}",
            u_eps.grid.n, ubar.grid.n
        )));
    }
    let grid = u_eps.grid;

    let naive = sub_fields(&u_eps.velocity, &ubar.velocity);
    let err_l2 = l2_norm_faces(&grid, &naive);
    let err_h1_naive = h1_norm_faces(&grid, &naive);
    let two_scale = two_scale_velocity(ubar, cell, master_grid, eps)?;
    let corrected = sub_fields(&u_eps.velocity, &two_scale);
    let err_h1_corrected = h1_norm_faces(&grid, &corrected);

    // pressure: S_eps - Sbar - b:D(ubar) - sum_a Sigma_a(./eps) g_a - c in
    // L^{3/2} over the fluid region, with c the fluid-mean difference
    let coords = StrainCoords::new(ubar);
    let b = &bbar_constant.components;
    let mut diff = vec![0.0; grid.cells()];
    let mut wsum = KahanSum::default();
    let mut dsum = KahanSum::default();
    for c in grid.cells_iter() {
        let idx = grid.idx(c);
        let x = grid.cell_center(c);
        let g = coords.eval(x);
        let y = [x[0] / eps, x[1] / eps, 0.0];
        let mut model = ubar.pressure[idx] + b[0] * g[0] + b[1] * g[1];
        for (a, sol) in cell.iter().enumerate() {
            model += interp_periodic(master_grid, &sol.state.pressure, [0.5, 0.5, 0.5], y) * g[a];
        }
        diff[idx] = u_eps.pressure[idx] - model;
        let w = 1.0 - fluid_chi[idx];
        wsum.add(w);
        dsum.add(w * diff[idx]);
    }
    let c0 = if wsum.value() > 0.0 { dsum.value() / wsum.value() } else { 0.0 };
    let q = 1.5;
    let mut acc = KahanSum::default();
    for c in grid.cells_iter() {
        let idx = grid.idx(c);
        let w = 1.0 - fluid_chi[idx];
        acc.add(w * (diff[idx] - c0).abs().powf(q));
    }
    let err_pressure = if wsum.value() > 0.0 {
        (acc.value() / wsum.value()).powf(1.0 / q)
    } else {
        0.0
    };
    Ok((err_l2, err_h1_naive, err_h1_corrected, err_pressure))
}

/// Inverse-gap moment statistic of the selected tiling at one eps, with the
/// 2D surrogate exponent gamma = 3/2 (gamma = 3/2 at d = 3 as well).
pub fn tiling_moment(master: &ParticleConfig, eps: f64) -> Result<f64, HomogenizeError> {
    let tiled = tile_master(master, eps)?;
    let selected = select_particles(&tiled);
    let restricted = ParticleConfig {
        dim: tiled.dim,
        domain: tiled.domain,
        particles: selected.iter().map(|&n| tiled.particles[n]).collect(),
        delta: tiled.delta,
        seed: tiled.seed,
    };
    let sampling = GapSampling::default_for_dim(restricted.dim);
    let gaps: Result<Vec<GapRecord>, EnsembleError> = (0..restricted.particles.len())
        .map(|n| rho_refined(&restricted, n, &sampling))
        .collect();
    let gamma = 1.5;
    let report = moment_statistic(&restricted, eps, gamma, &gaps?, None)?;
    Ok(report.value)
}

/// Run the full experiment: periodic cell solves and effective tensor on the
/// master realization, then per-eps heterogeneous and homogenized solves.
pub fn convergence_table(exp: &EpsExperiment) -> Result<HomReport, HomogenizeError> {
    exp.validate()?;
    // master cell problem: effective tensor, constant, correctors
    let master_grid = Grid::new(
        exp.master.dim,
        exp.cell_n,
        exp.master.domain.side(),
        BoundaryKind::Periodic,
    )?;
    let chi = rasterize(&exp.master, &master_grid)?;
    let mu = ViscosityField::new(master_grid, chi, exp.kappa)?;
    let lambda = mu.fraction();
    let mut params = SolverParams::new(exp.kappa);
    params.tol_mom = exp.tol;
    params.tol_div = exp.tol.max(1e-10);
    let cell = crate::effective::solve_basis(&mu, &params)?;
    let (bbar, _flux) = crate::effective::effective_viscosity(&cell, &mu)?;
    let (_bs, bp) = crate::effective::effective_b(&cell, &exp.master, &mu)?;

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (&eps, &ngrid) in exp.eps_ladder.iter().zip(&exp.grid_n) {
        let attempt = (|| -> Result<HomReportRow, HomogenizeError> {
            let grid = Grid::new(2, ngrid, 1.0, BoundaryKind::Dirichlet)?;
            let config = hetero_config(&exp.master, eps)?;
            let chi_eps = rasterize(&config, &grid)?;
            let mu_eps = ViscosityField::new(grid, chi_eps, exp.kappa)?;
            let f = face_force(&grid, |x| exp.force.eval(x));
            let u_eps = solve_dirichlet(&mu_eps, &f, false, &params)?;
            let ubar = solve_homogenized(&bbar, lambda, &exp.force, grid, &params)?;
            let (err_l2, err_h1_naive, err_h1_corrected, err_pressure) =
                two_scale_error(&u_eps, &ubar, &cell, &bp, &master_grid, eps, &mu_eps.chi)?;
            let moment_stat = tiling_moment(&exp.master, eps)?;
            Ok(HomReportRow {
                eps,
                h: grid.h,
                err_l2,
                err_h1_naive,
                err_h1_corrected,
                err_pressure,
                moment_stat,
            })
        })();
        match attempt {
            Ok(row) => rows.push(row),
            Err(e) => failures.push((eps, e.to_string())),
        }
    }
    Ok(HomReport { lambda, kappa: exp.kappa, rows, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::EstimatorKind;

    fn master_two_disks() -> ParticleConfig {
        ParticleConfig {
            dim: 2,
            domain: Domain::Periodic { side: 4.0 },
            particles: vec![
                Particle { center: [1.1, 1.3, 0.0], radius: 0.5 },
                Particle { center: [2.9, 2.6, 0.0], radius: 0.45 },
            ],
            delta: 0.05,
            seed: 7,
        }
    }

    #[test]
    fn tiling_counts_and_commensurability() {
        let master = master_two_disks();
        let tiled = tile_master(&master, 0.125).unwrap();
        assert_eq!(tiled.particles.len(), 2 * 4);
        assert_eq!(tiled.domain.side(), 8.0);
        // incommensurate blow-up rejected
        assert!(matches!(
            tile_master(&master, 0.1),
            Err(HomogenizeError::IncommensurateGrids(_))
        ));
    }

    #[test]
    fn selection_matches_predicate() {
        let master = master_two_disks();
        let tiled = tile_master(&master, 0.125).unwrap();
        let selected = select_particles(&tiled);
        let side = tiled.domain.side();
        for n in 0..tiled.particles.len() {
            let p = &tiled.particles[n];
            let inside = (0..2).all(|i| {
                p.center[i] - p.radius >= tiled.delta && p.center[i] + p.radius <= side - tiled.delta
            });
            assert_eq!(selected.contains(&n), inside, "particle {n}");
        }
        // a particle overlapping the boundary is excluded
        let mut bad = tiled.clone();
        bad.particles.push(Particle { center: [0.1, 4.0, 0.0], radius: 0.5 });
        let sel = select_particles(&bad);
        assert!(!sel.contains(&(bad.particles.len() - 1)));
    }

    #[test]
    fn hetero_config_scales_into_unit_box() {
        let master = master_two_disks();
        let cfg = hetero_config(&master, 0.125).unwrap();
        assert_eq!(cfg.domain.side(), 1.0);
        for p in &cfg.particles {
            assert!((0.4..=0.5).contains(&(p.radius / 0.125)));
            for i in 0..2 {
                assert!(p.center[i] - p.radius >= 0.0 && p.center[i] + p.radius <= 1.0);
            }
        }
    }

    #[test]
    fn trivial_two_scale_error_is_zero() {
        // u_eps = ubar and psi = 0: all errors vanish
        let grid = Grid::new(2, 32, 1.0, BoundaryKind::Dirichlet).unwrap();
        let master_grid = Grid::new(2, 16, 4.0, BoundaryKind::Periodic).unwrap();
        let mu = ViscosityField::uniform(grid);
        let f = face_force(&grid, |x| [(std::f64::consts::PI * x[1]).sin(), 0.0]);
        let st = solve_dirichlet(&mu, &f, false, &SolverParams::new(1.0)).unwrap();
        let basis = strain_basis(2);
        let cell: Vec<CellSolution> = basis
            .elements
            .iter()
            .map(|e| CellSolution {
                strain: *e,
                state: FlowState {
                    grid: master_grid,
                    velocity: vec![vec![0.0; master_grid.cells()]; 2],
                    pressure: vec![0.0; master_grid.cells()],
                    residual_mom: 0.0,
                    residual_div: 0.0,
                    iterations: 0,
                },
                kappa: 1.0,
            })
            .collect();
        let bp = EffectiveConstant {
            dim: 2,
            components: vec![0.0, 0.0],
            kappa: 1.0,
            estimator: EstimatorKind::PressureAverage,
        };
        let chi = vec![0.0; grid.cells()];
        let (l2, h1n, h1c, pr) =
            two_scale_error(&st, &st, &cell, &bp, &master_grid, 0.25, &chi).unwrap();
        assert!(l2 < 1e-14 && h1n < 1e-13 && h1c < 1e-13 && pr < 1e-12, "{l2} {h1n} {h1c} {pr}");
    }

    #[test]
    fn empty_master_errors_are_discretization_only() {
        let exp = EpsExperiment {
            master: ParticleConfig {
                dim: 2,
                domain: Domain::Periodic { side: 4.0 },
                particles: vec![],
                delta: 0.05,
                seed: 0,
            },
            eps_ladder: vec![0.25, 0.125],
            grid_n: vec![32, 32],
            cell_n: 16,
            kappa: 100.0,
            force: ForceExpr::SineShear { amplitude: 1.0 },
            tol: 1e-8,
        };
        let report = convergence_table(&exp).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.lambda, 0.0);
        for row in &report.rows {
            // with no particles the two solves coincide to solver tolerance
            assert!(row.err_l2 < 1e-7, "err_l2 = {}", row.err_l2);
            assert!(row.err_h1_corrected < 1e-5, "err_h1 = {}", row.err_h1_corrected);
            assert!(row.err_pressure < 1e-5, "err_p = {}", row.err_pressure);
            assert_eq!(row.moment_stat, 0.0);
        }
    }

    #[test]
    fn small_experiment_runs_and_reports() {
        let exp = EpsExperiment {
            master: master_two_disks(),
            eps_ladder: vec![0.25, 0.125],
            grid_n: vec![64, 128],
            cell_n: 64,
            kappa: 100.0,
            force: ForceExpr::SineShear { amplitude: 1.0 },
            tol: 1e-8,
        };
        let report = convergence_table(&exp).unwrap();
        assert!(report.failures.is_empty(), "{:?}", report.failures);
        assert_eq!(report.rows.len(), 2);
        assert!(report.lambda > 0.05 && report.lambda < 0.15);
        for row in &report.rows {
            assert!(row.err_l2 > 0.0 && row.err_l2.is_finite());
            assert!(row.err_h1_naive >= row.err_l2);
            assert!(row.err_pressure.is_finite());
            assert!(row.moment_stat.is_finite() && row.moment_stat > 0.0);
        }
        // validation catches bad ladders
        let mut bad = exp.clone();
        bad.eps_ladder = vec![0.125, 0.25];
        assert!(bad.validate().is_err());
        let mut bad = exp;
        bad.grid_n = vec![32, 32];
        assert!(bad.validate().is_err());
    }
}
