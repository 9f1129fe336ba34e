//! Effective viscosity and effective pressure constant of a suspension,
//! assembled from periodic cell solves.
//!
//! Conventions: the fluid viscosity is normalized to 1 and the stress carries
//! an explicit factor 2, sigma = 2 mu (D(psi) + E) - Sigma Id, so the
//! effective tensor satisfies E : B E = <mu |D(psi_E) + E|^2> and the
//! homogenized stress is 2 B D(u). Readers expecting an effective shear
//! viscosity directly should read mu_eff = B-eigenvalue in these units.
//!
//! Each quantity has two independent estimators. For B: the energy
//! (polarization) form and the volume-averaged deviatoric flux. For b: the
//! particle-surface stress integral and the negative mean of the anchored
//! penalized pressure. Their agreement is a consistency check on the solver.

use crate::ensemble::{EnsembleError, ParticleConfig};
use crate::ensemble::{generate_rsa, RsaParams};
use crate::geom::KahanSum;
use crate::stokes::periodic::{interp_periodic, solve_cell, Mat3, PeriodicOps};
use crate::stokes::visc::rasterize;
use crate::stokes::{BoundaryKind, FlowState, Grid, SolverParams, StokesError, ViscosityField};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EffectiveError {
    #[error(transparent)]
    Stokes(#[from] StokesError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
    #[error("surface under-resolved: particle {particle} has only {resolved} fluid samples (need {needed})")]
    SurfaceUnderResolved { particle: usize, resolved: usize, needed: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Orthonormal basis of trace-free symmetric d x d matrices under the
/// Frobenius inner product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrainBasis {
    pub dim: usize,
    pub elements: Vec<Mat3>,
}

pub fn strain_basis(dim: usize) -> StrainBasis {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut elements: Vec<Mat3> = Vec::new();
    let mut m = [[0.0; 3]; 3];
    m[0][0] = s;
    m[1][1] = -s;
    elements.push(m);
    let mut m = [[0.0; 3]; 3];
    m[0][1] = s;
    m[1][0] = s;
    elements.push(m);
    if dim == 3 {
        let t = 1.0 / 6.0f64.sqrt();
        let mut m = [[0.0; 3]; 3];
        m[0][0] = t;
        m[1][1] = t;
        m[2][2] = -2.0 * t;
        elements.push(m);
        for (i, j) in [(0, 2), (1, 2)] {
            let mut m = [[0.0; 3]; 3];
            m[i][j] = s;
            m[j][i] = s;
            elements.push(m);
        }
    }
    StrainBasis { dim, elements }
}

impl StrainBasis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Reassemble a matrix from basis coordinates.
    pub fn combine(&self, coords: &[f64]) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (c, e) in coords.iter().zip(&self.elements) {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    out[i][j] += c * e[i][j];
                }
            }
        }
        out
    }
}

/// Frobenius inner product restricted to the leading d x d block.
pub fn frob_inner(a: &Mat3, b: &Mat3, dim: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            acc += a[i][j] * b[i][j];
        }
    }
    acc
}

/// One periodic cell solve: corrector and pressure for an imposed strain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSolution {
    pub strain: Mat3,
    pub state: FlowState,
    pub kappa: f64,
}

/// Solve the cell problem for every basis strain at one kappa.
pub fn solve_basis(
    mu: &ViscosityField,
    params: &SolverParams,
) -> Result<Vec<CellSolution>, EffectiveError> {
    let basis = strain_basis(mu.grid.dim);
    basis
        .elements
        .iter()
        .map(|e| {
            let state = solve_cell(mu, e, params)?;
            Ok(CellSolution { strain: *e, state, kappa: params.kappa })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    Energy,
    Flux,
    BoundaryIntegral,
    PressureAverage,
}

/// Effective viscosity in strain-basis coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTensor {
    pub dim: usize,
    /// B in the basis of `strain_basis(dim)`, row-major.
    pub matrix: Vec<Vec<f64>>,
    /// kappa at which computed; infinity marks an extrapolated limit.
    pub kappa: f64,
    /// Particle volume fraction measured on the grid.
    pub lambda: f64,
    pub estimator: EstimatorKind,
}

impl EffectiveTensor {
    pub fn asymmetry(&self) -> f64 {
        let k = self.matrix.len();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                num += (self.matrix[i][j] - self.matrix[j][i]).powi(2);
                den += self.matrix[i][j].powi(2);
            }
        }
        if den == 0.0 {
            0.0
        } else {
            (num / den).sqrt()
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let k = self.matrix.len();
        let sym = DMatrix::from_fn(k, k, |i, j| 0.5 * (self.matrix[i][j] + self.matrix[j][i]));
        sym.symmetric_eigenvalues().iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

fn check_consistent(solutions: &[CellSolution], dim: usize) -> Result<(), EffectiveError> {
    let basis = strain_basis(dim);
    if solutions.len() != basis.len() {
        return Err(EffectiveError::InconsistentInputs(format!(
            "expected {} cell solutions for d = {}, got {}",
            basis.len(),
            dim,
            solutions.len()
        )));
    }
    let kappa = solutions[0].kappa;
    for s in solutions {
        if (s.kappa - kappa).abs() > 0.0 {
            return Err(EffectiveError::InconsistentInputs(format!(
                "mixed kappa values {} and {}",
                kappa, s.kappa
            )));
        }
        if s.state.grid != solutions[0].state.grid {
            return Err(EffectiveError::InconsistentInputs("mixed grids".into()));
        }
    }
    for (s, e) in solutions.iter().zip(&basis.elements) {
        if frob_inner(&s.strain, e, dim) < 0.999 {
            return Err(EffectiveError::InconsistentInputs(
                "cell solutions are not ordered along the strain basis".into(),
            ));
        }
    }
    Ok(())
}

/// Both estimators of the effective viscosity: energy polarization and
/// volume-averaged deviatoric flux.
pub fn effective_viscosity(
    solutions: &[CellSolution],
    mu: &ViscosityField,
) -> Result<(EffectiveTensor, EffectiveTensor), EffectiveError> {
    let dim = mu.grid.dim;
    check_consistent(solutions, dim)?;
    if solutions[0].state.grid != mu.grid {
        return Err(EffectiveError::InconsistentInputs("viscosity grid differs from solutions".into()));
    }
    let ops = PeriodicOps::new(mu);
    let k = solutions.len();
    let lambda = mu.fraction();
    let kappa = solutions[0].kappa;
    let mut energy = vec![vec![0.0; k]; k];
    let mut flux = vec![vec![0.0; k]; k];
    for (b, sb) in solutions.iter().enumerate() {
        let q = ops.mean_flux(&sb.state.velocity, &sb.strain);
        // deviatoric projection is implicit: basis strains are trace-free
        for (a, sa) in solutions.iter().enumerate() {
            energy[a][b] =
                ops.energy_pair(&sa.state.velocity, &sa.strain, &sb.state.velocity, &sb.strain);
            flux[a][b] = frob_inner(&sa.strain, &q, dim);
        }
    }
    let make = |matrix: Vec<Vec<f64>>, estimator| EffectiveTensor {
        dim,
        matrix,
        kappa,
        lambda,
        estimator,
    };
    Ok((make(energy, EstimatorKind::Energy), make(flux, EstimatorKind::Flux)))
}

/// Effective pressure constant in strain-basis coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveConstant {
    pub dim: usize,
    /// Components b : E_a for the basis strains.
    pub components: Vec<f64>,
    pub kappa: f64,
    pub estimator: EstimatorKind,
}

impl EffectiveConstant {
    pub fn matrix(&self) -> Mat3 {
        strain_basis(self.dim).combine(&self.components)
    }
}

/// Minimum number of resolved fluid samples per particle surface.
pub const MIN_SURFACE_SAMPLES: usize = 32;

/// Uniform points on the unit circle (d=2) or a Fibonacci sphere (d=3).
fn surface_directions(dim: usize, count: usize) -> Vec<[f64; 3]> {
    if dim == 2 {
        (0..count)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / count as f64;
                [t.cos(), t.sin(), 0.0]
            })
            .collect()
    } else {
        let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
        (0..count)
            .map(|k| {
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                let r = (1.0 - z * z).sqrt();
                let t = golden * k as f64;
                [r * t.cos(), r * t.sin(), z]
            })
            .collect()
    }
}

/// Precomputed strain and pressure fields of one cell solution, for pointwise
/// stress sampling without reassembling per sample.
struct StressSampler<'a> {
    grid: &'a Grid,
    dim: usize,
    diag: Vec<Vec<f64>>,
    off: Vec<Vec<f64>>,
    off_pairs: Vec<(usize, usize)>,
    pressure: &'a [f64],
}

impl<'a> StressSampler<'a> {
    fn new(ops: &'a PeriodicOps, sol: &'a CellSolution) -> Self {
        let (diag, off) = ops.strains(&sol.state.velocity, &sol.strain);
        let dim = ops.grid.dim;
        let off_pairs = if dim == 2 { vec![(0, 1)] } else { vec![(0, 1), (0, 2), (1, 2)] };
        StressSampler { grid: &ops.grid, dim, diag, off, off_pairs, pressure: &sol.state.pressure }
    }

    /// sigma(x) = 2 (D(psi) + E) - Sigma Id at a fluid point.
    fn stress(&self, x: [f64; 3]) -> Mat3 {
        let centered = [0.5, 0.5, 0.5];
        let p = interp_periodic(self.grid, self.pressure, centered, x);
        let mut out = [[0.0; 3]; 3];
        for i in 0..self.dim {
            out[i][i] = 2.0 * interp_periodic(self.grid, &self.diag[i], centered, x) - p;
        }
        for (k, &(i, j)) in self.off_pairs.iter().enumerate() {
            let mut offs = [0.5, 0.5, 0.5];
            offs[i] = 1.0;
            offs[j] = 1.0;
            let v = 2.0 * interp_periodic(self.grid, &self.off[k], offs, x);
            out[i][j] = v;
            out[j][i] = v;
        }
        out
    }
}

/// Both estimators of the effective constant b.
pub fn effective_b(
    solutions: &[CellSolution],
    config: &ParticleConfig,
    mu: &ViscosityField,
) -> Result<(EffectiveConstant, EffectiveConstant), EffectiveError> {
    let grid = mu.grid;
    let dim = grid.dim;
    check_consistent(solutions, dim)?;
    config.validate()?;
    let kappa = solutions[0].kappa;
    let volume = grid.len.powi(dim as i32);
    let d = dim as f64;
    let samples = MIN_SURFACE_SAMPLES.max(if dim == 2 { 1024 } else { 2048 });
    let dirs = surface_directions(dim, samples);
    let ops = PeriodicOps::new(mu);

    let mut surface = Vec::with_capacity(solutions.len());
    let mut pressure_avg = Vec::with_capacity(solutions.len());
    for sol in solutions {
        let sampler = StressSampler::new(&ops, sol);
        let mut total = KahanSum::default();
        for (n, p) in config.particles.iter().enumerate() {
            // sample the stress one grid spacing outside the surface, on the
            // fluid side of the penalized interface
            let r_in = p.radius;
            let r_out = p.radius + 2.0 * grid.h;
            let mut resolved = 0usize;
            let mut acc = KahanSum::default();
            for nu in &dirs {
                let x = [
                    p.center[0] + r_out * nu[0],
                    p.center[1] + r_out * nu[1],
                    p.center[2] + r_out * nu[2],
                ];
                // the sample must sit in resolved fluid
                let chi_here = interp_periodic(&grid, &mu.chi, [0.5, 0.5, 0.5], x);
                if chi_here > 0.5 {
                    continue;
                }
                resolved += 1;
                let sig = sampler.stress(x);
                let mut v = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        v += r_out * nu[i] * sig[i][j] * nu[j];
                    }
                }
                acc.add(v);
            }
            if resolved < MIN_SURFACE_SAMPLES {
                return Err(EffectiveError::SurfaceUnderResolved {
                    particle: n,
                    resolved,
                    needed: MIN_SURFACE_SAMPLES,
                });
            }
            let area_out = if dim == 2 {
                2.0 * std::f64::consts::PI * r_out
            } else {
                4.0 * std::f64::consts::PI * r_out * r_out
            };
            let moment_out = acc.value() / resolved as f64 * area_out;
            // pull the moment back from the sampling circle to the particle
            // surface: for divergence-free sigma the two differ by d times
            // the pressure integral over the annulus in between
            let mut shell = KahanSum::default();
            for &(t, w) in &[
                (0.069431844202973714, 0.17392742256872692),
                (0.33000947820757187, 0.32607257743127305),
                (0.66999052179242813, 0.32607257743127305),
                (0.93056815579702623, 0.17392742256872692),
            ] {
                let s = r_in + t * (r_out - r_in);
                let mut ring = KahanSum::default();
                for nu in dirs.iter() {
                    let x = [
                        p.center[0] + s * nu[0],
                        p.center[1] + s * nu[1],
                        p.center[2] + s * nu[2],
                    ];
                    ring.add(interp_periodic(&grid, &sol.state.pressure, [0.5, 0.5, 0.5], x));
                }
                let shell_area = if dim == 2 {
                    2.0 * std::f64::consts::PI * s
                } else {
                    4.0 * std::f64::consts::PI * s * s
                };
                shell.add(w * ring.value() / dirs.len() as f64 * shell_area);
            }
            let annulus_pressure = shell.value() * (r_out - r_in);
            total.add(moment_out + d * annulus_pressure);
        }
        surface.push(total.value() / (d * volume));

        // estimator ii: minus the whole-box mean of the anchored pressure
        let mean = crate::geom::kahan_sum(sol.state.pressure.iter().copied())
            / sol.state.pressure.len() as f64;
        pressure_avg.push(-mean);
    }
    let make = |components: Vec<f64>, estimator| EffectiveConstant { dim, components, kappa, estimator };
    Ok((
        make(surface, EstimatorKind::BoundaryIntegral),
        make(pressure_avg, EstimatorKind::PressureAverage),
    ))
}

/// Richardson extrapolation of a kappa ladder assuming a leading c / kappa
/// error. Returns the limit, the magnitude of the last correction as an
/// uncertainty, and whether the values were monotone in kappa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolated {
    pub limit: f64,
    pub uncertainty: f64,
    pub monotone: bool,
}

pub fn kappa_extrapolate(values: &[(f64, f64)]) -> Result<Extrapolated, EffectiveError> {
    if values.len() < 3 {
        return Err(EffectiveError::InvalidParameter(format!(
            "kappa extrapolation needs at least 3 values, got {}",
            values.len()
        )));
    }
    for w in values.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(EffectiveError::InvalidParameter(
                "kappa values must be strictly increasing".into(),
            ));
        }
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let monotone = diffs.iter().all(|&d| d >= 0.0) || diffs.iter().all(|&d| d <= 0.0);
    // eliminate the c / kappa term from the last two points
    let (k1, v1) = values[values.len() - 2];
    let (k2, v2) = values[values.len() - 1];
    let limit = (v2 * k2 - v1 * k1) / (k2 - k1);
    let uncertainty = (limit - v2).abs();
    Ok(Extrapolated { limit, uncertainty, monotone })
}

/// Extrapolate a tensor ladder entrywise; the result carries kappa = inf.
pub fn extrapolate_tensor(
    ladder: &[EffectiveTensor],
) -> Result<(EffectiveTensor, bool), EffectiveError> {
    if ladder.len() < 3 {
        return Err(EffectiveError::InvalidParameter(
            "tensor extrapolation needs at least 3 ladder entries".into(),
        ));
    }
    let k = ladder[0].matrix.len();
    let mut matrix = vec![vec![0.0; k]; k];
    let mut monotone = true;
    for i in 0..k {
        for j in 0..k {
            let series: Vec<(f64, f64)> =
                ladder.iter().map(|t| (t.kappa, t.matrix[i][j])).collect();
            let ex = kappa_extrapolate(&series)?;
            matrix[i][j] = ex.limit;
            if i == j && !ex.monotone {
                monotone = false;
            }
        }
    }
    Ok((
        EffectiveTensor {
            dim: ladder[0].dim,
            matrix,
            kappa: f64::INFINITY,
            lambda: ladder[0].lambda,
            estimator: ladder[0].estimator,
        },
        monotone,
    ))
}

/// Full single-configuration pipeline: rasterize, solve the basis at each
/// kappa, assemble both estimator pairs, extrapolate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub lambda: f64,
    /// Energy-estimator tensors along the ladder, then extrapolated.
    pub energy_ladder: Vec<EffectiveTensor>,
    pub flux_ladder: Vec<EffectiveTensor>,
    pub extrapolated: EffectiveTensor,
    pub monotone: bool,
    pub b_surface: Vec<EffectiveConstant>,
    pub b_pressure: Vec<EffectiveConstant>,
    /// Extrapolated pressure-average components of b.
    pub b_limit: Vec<f64>,
    /// Worst momentum residual across all solves.
    pub residual_mom: f64,
    pub residual_div: f64,
}

pub fn analyze_config(
    config: &ParticleConfig,
    grid: &Grid,
    kappa_ladder: &[f64],
    tol: f64,
) -> Result<ConfigResult, EffectiveError> {
    if kappa_ladder.len() < 3 {
        return Err(EffectiveError::InvalidParameter(
            "kappa ladder needs at least 3 rungs".into(),
        ));
    }
    let chi = rasterize(config, grid)?;
    let mut energy_ladder = Vec::new();
    let mut flux_ladder = Vec::new();
    let mut b_surface = Vec::new();
    let mut b_pressure = Vec::new();
    let mut residual_mom = 0.0f64;
    let mut residual_div = 0.0f64;
    let mut lambda = 0.0;
    for &kappa in kappa_ladder {
        let mu = ViscosityField::new(*grid, chi.clone(), kappa)?;
        lambda = mu.fraction();
        let mut params = SolverParams::new(kappa);
        params.tol_mom = tol;
        params.tol_div = tol.max(1e-10);
        let solutions = solve_basis(&mu, &params)?;
        for s in &solutions {
            residual_mom = residual_mom.max(s.state.residual_mom);
            residual_div = residual_div.max(s.state.residual_div);
        }
        let (en, fl) = effective_viscosity(&solutions, &mu)?;
        let (bs, bp) = effective_b(&solutions, config, &mu)?;
        energy_ladder.push(en);
        flux_ladder.push(fl);
        b_surface.push(bs);
        b_pressure.push(bp);
    }
    let (extrapolated, monotone) = extrapolate_tensor(&energy_ladder)?;
    let k = b_pressure[0].components.len();
    let mut b_limit = vec![0.0; k];
    for a in 0..k {
        let series: Vec<(f64, f64)> = b_pressure
            .iter()
            .zip(kappa_ladder)
            .map(|(c, &kap)| (kap, c.components[a]))
            .collect();
        b_limit[a] = kappa_extrapolate(&series)?.limit;
    }
    Ok(ConfigResult {
        lambda,
        energy_ladder,
        flux_ladder,
        extrapolated,
        monotone,
        b_surface,
        b_pressure,
        b_limit,
        residual_mom,
        residual_div,
    })
}

/// Monte Carlo over an ensemble: one RSA draw and full analysis per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSpec {
    /// Template RSA parameters; the per-sample seed overrides `rsa.seed`.
    pub rsa: RsaParams,
    pub seeds: Vec<u64>,
    pub grid_n: usize,
    pub kappa_ladder: Vec<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub seed: u64,
    pub result: ConfigResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub outcomes: Vec<SampleOutcome>,
    pub failures: Vec<FailureRecord>,
    /// Mean of the extrapolated energy-estimator matrices.
    pub mean_matrix: Vec<Vec<f64>>,
    /// Standard error per entry; None when a single sample leaves it
    /// undefined.
    pub stderr_matrix: Option<Vec<Vec<f64>>>,
    pub mean_lambda: f64,
}

pub fn monte_carlo(spec: &MonteCarloSpec) -> Result<MonteCarloSummary, EffectiveError> {
    if spec.seeds.is_empty() {
        return Err(EffectiveError::InvalidParameter("need at least one seed".into()));
    }
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for &seed in &spec.seeds {
        let mut rsa = spec.rsa.clone();
        rsa.seed = seed;
        let attempt = (|| -> Result<ConfigResult, EffectiveError> {
            let config = generate_rsa(&rsa)?;
            let grid = Grid::new(rsa.dim, spec.grid_n, rsa.box_side, BoundaryKind::Periodic)?;
            analyze_config(&config, &grid, &spec.kappa_ladder, spec.tol)
        })();
        match attempt {
            Ok(result) => outcomes.push(SampleOutcome { seed, result }),
            Err(e) => failures.push(FailureRecord { seed, error: e.to_string() }),
        }
    }
    if outcomes.is_empty() {
        return Err(EffectiveError::InvalidParameter(format!(
            "all {} samples failed; first error: {}",
            failures.len(),
            failures[0].error
        )));
    }
    let k = outcomes[0].result.extrapolated.matrix.len();
    let count = outcomes.len() as f64;
    let mut mean_matrix = vec![vec![0.0; k]; k];
    for o in &outcomes {
        for i in 0..k {
            for j in 0..k {
                mean_matrix[i][j] += o.result.extrapolated.matrix[i][j] / count;
            }
        }
    }
    let stderr_matrix = if outcomes.len() > 1 {
        let mut var = vec![vec![0.0; k]; k];
        for o in &outcomes {
            for i in 0..k {
                for j in 0..k {
                    let d = o.result.extrapolated.matrix[i][j] - mean_matrix[i][j];
                    var[i][j] += d * d / (count - 1.0);
                }
            }
        }
        Some(
            var.iter()
                .map(|row| row.iter().map(|v| (v / count).sqrt()).collect())
                .collect(),
        )
    } else {
        None
    };
    let mean_lambda = outcomes.iter().map(|o| o.result.lambda).sum::<f64>() / count;
    Ok(MonteCarloSummary { outcomes, failures, mean_matrix, stderr_matrix, mean_lambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{Domain, Particle};
    use crate::ensemble::RsaTarget;

    #[test]
    fn basis_orthonormal_trace_free() {
        for dim in [2usize, 3] {
            let basis = strain_basis(dim);
            assert_eq!(basis.len(), if dim == 2 { 2 } else { 5 });
            for (a, ea) in basis.elements.iter().enumerate() {
                let trace: f64 = (0..dim).map(|i| ea[i][i]).sum();
                assert!(trace.abs() < 1e-15);
                for i in 0..dim {
                    for j in 0..dim {
                        assert_eq!(ea[i][j], ea[j][i]);
                    }
                }
                for (b, eb) in basis.elements.iter().enumerate() {
                    let g = frob_inner(ea, eb, dim);
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((g - want).abs() < 1e-15, "gram[{a}][{b}] = {g}");
                }
            }
        }
    }

    #[test]
    fn basis_d2_canonical() {
        let basis = strain_basis(2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(basis.elements[0][0][0], s);
        assert_eq!(basis.elements[0][1][1], -s);
        assert_eq!(basis.elements[1][0][1], s);
        assert_eq!(basis.elements[1][1][0], s);
    }

    fn empty_config(side: f64) -> ParticleConfig {
        ParticleConfig {
            dim: 2,
            domain: Domain::Periodic { side },
            particles: vec![],
            delta: 0.05,
            seed: 0,
        }
    }

    #[test]
    fn empty_suspension_identity() {
        let grid = Grid::new(2, 16, 1.0, BoundaryKind::Periodic).unwrap();
        let config = empty_config(1.0);
        let chi = rasterize(&config, &grid).unwrap();
        let mu = ViscosityField::new(grid, chi, 100.0).unwrap();
        let solutions = solve_basis(&mu, &SolverParams::new(100.0)).unwrap();
        let (en, fl) = effective_viscosity(&solutions, &mu).unwrap();
        for t in [&en, &fl] {
            for i in 0..2 {
                for j in 0..2 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((t.matrix[i][j] - want).abs() < 1e-10, "{:?}", t.matrix);
                }
            }
        }
        let (bs, bp) = effective_b(&solutions, &config, &mu).unwrap();
        assert!(bs.components.iter().all(|v| v.abs() < 1e-10));
        assert!(bp.components.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn kappa_one_zero_pressure_constant() {
        // with kappa = 1 the corrector and pressure vanish; estimator i sees
        // sigma = 2E which integrates to zero against trace-free strains
        let grid = Grid::new(2, 64, 1.0, BoundaryKind::Periodic).unwrap();
        let config = ParticleConfig {
            dim: 2,
            domain: Domain::Periodic { side: 1.0 },
            particles: vec![Particle { center: [0.5, 0.5, 0.0], radius: 0.2 }],
            delta: 0.05,
            seed: 0,
        };
        let chi = rasterize(&config, &grid).unwrap();
        let mu = ViscosityField::new(grid, chi, 1.0).unwrap();
        let solutions = solve_basis(&mu, &SolverParams::new(1.0)).unwrap();
        let (bs, bp) = effective_b(&solutions, &config, &mu).unwrap();
        assert!(bs.components.iter().all(|v| v.abs() < 1e-10), "{:?}", bs.components);
        assert!(bp.components.iter().all(|v| v.abs() < 1e-12), "{:?}", bp.components);
    }

    #[test]
    fn jensen_lower_bound_and_estimator_agreement() {
        let grid = Grid::new(2, 96, 1.0, BoundaryKind::Periodic).unwrap();
        let config = ParticleConfig {
            dim: 2,
            domain: Domain::Periodic { side: 1.0 },
            particles: vec![
                Particle { center: [0.3, 0.35, 0.0], radius: 0.13 },
                Particle { center: [0.72, 0.68, 0.0], radius: 0.11 },
            ],
            delta: 0.02,
            seed: 0,
        };
        let chi = rasterize(&config, &grid).unwrap();
        let mu = ViscosityField::new(grid, chi, 1000.0).unwrap();
        let params = SolverParams::new(1000.0);
        let solutions = solve_basis(&mu, &params).unwrap();
        let (en, fl) = effective_viscosity(&solutions, &mu).unwrap();
        for i in 0..2 {
            assert!(en.matrix[i][i] >= 1.0, "diagonal {} below 1", en.matrix[i][i]);
        }
        assert!(en.asymmetry() < 10.0 * params.tol_mom);
        assert!(en.min_eigenvalue() >= 1.0 - 1e-6);
        // Hill-Mandel consistency of the two estimators
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (en.matrix[i][j] - fl.matrix[i][j]).abs() < 10.0 * params.tol_mom * en.matrix[i][i],
                    "energy {} vs flux {}",
                    en.matrix[i][j],
                    fl.matrix[i][j]
                );
            }
        }
    }

    #[test]
    fn extrapolation_exact_model() {
        let a = 3.7;
        let b = 42.0;
        let values: Vec<(f64, f64)> =
            [1e2, 1e3, 1e4].iter().map(|&k| (k, a - b / k)).collect();
        let ex = kappa_extrapolate(&values).unwrap();
        assert!((ex.limit - a).abs() < 1e-10);
        assert!(ex.monotone);
        // constant sequence: limit is the constant, uncertainty zero
        let flat: Vec<(f64, f64)> = [1e2, 1e3, 1e4].iter().map(|&k| (k, 2.5)).collect();
        let ex = kappa_extrapolate(&flat).unwrap();
        assert_eq!(ex.limit, 2.5);
        assert_eq!(ex.uncertainty, 0.0);
        // non-monotone data still extrapolates but is flagged
        let wiggle = vec![(1e2, 1.0), (1e3, 1.2), (1e4, 1.1)];
        assert!(!kappa_extrapolate(&wiggle).unwrap().monotone);
        // too few points rejected
        assert!(kappa_extrapolate(&values[..2]).is_err());
    }

    #[test]
    fn inconsistent_solutions_rejected() {
        let grid = Grid::new(2, 16, 1.0, BoundaryKind::Periodic).unwrap();
        let mu = ViscosityField::uniform(grid);
        let mut solutions = solve_basis(&mu, &SolverParams::new(1.0)).unwrap();
        solutions[1].kappa = 7.0;
        assert!(matches!(
            effective_viscosity(&solutions, &mu),
            Err(EffectiveError::InconsistentInputs(_))
        ));
        solutions.pop();
        assert!(effective_viscosity(&solutions, &mu).is_err());
    }

    #[test]
    fn monte_carlo_determinism_and_degenerate_stats() {
        let mut rsa = RsaParams::new(0, 2, 4.0, RsaTarget::Count(2));
        rsa.delta = 0.05;
        let spec = MonteCarloSpec {
            rsa,
            seeds: vec![11, 11],
            grid_n: 32,
            kappa_ladder: vec![1e1, 1e2, 1e3],
            tol: 1e-8,
        };
        let summary = monte_carlo(&spec).unwrap();
        assert_eq!(summary.outcomes.len(), 2);
        assert_eq!(summary.outcomes[0].result, summary.outcomes[1].result);
        // identical seeds: zero variance
        let se = summary.stderr_matrix.as_ref().unwrap();
        assert!(se.iter().flatten().all(|&v| v == 0.0));
        // single sample: stderr undefined
        let single = MonteCarloSpec { seeds: vec![11], ..spec.clone() };
        let s1 = monte_carlo(&single).unwrap();
        assert!(s1.stderr_matrix.is_none());
        assert_eq!(s1.mean_matrix, summary.outcomes[0].result.extrapolated.matrix);
    }
}
