//! Particle indicator rasterization and the penalized viscosity field
//! mu = 1 + (kappa - 1) chi.

use super::grid::{Grid, StokesError};
use crate::ensemble::{Domain, ParticleConfig};
use crate::geom::{norm, periodic_delta, sub};
use serde::{Deserialize, Serialize};

/// Cell-centered coverage fraction chi in [0, 1] by subcell sampling.
pub fn rasterize(config: &ParticleConfig, grid: &Grid) -> Result<Vec<f64>, StokesError> {
    let h = grid.h;
    for p in &config.particles {
        if p.radius < 2.0 * h {
            return Err(StokesError::UnderResolved { radius: p.radius, min: 2.0 * h });
        }
    }
    if (config.domain.side() - grid.len).abs() > 1e-12 * grid.len {
        return Err(StokesError::InvalidParameter(format!(
            "grid length {} does not cover the configuration box {}",
            grid.len,
            config.domain.side()
        )));
    }
    let periodic = matches!(config.domain, Domain::Periodic { .. });
    let n = grid.n as isize;
    let sub_n = 4usize; // 4 samples per axis, 4^d per cell
    let subs: Vec<f64> = (0..sub_n).map(|k| (k as f64 + 0.5) / sub_n as f64).collect();
    let weight = 1.0 / (sub_n as f64).powi(grid.dim as i32);
    let mut chi = vec![0.0; grid.cells()];

    for p in &config.particles {
        // cells intersecting the particle's bounding box (with one cell slack)
        let lo_hi: Vec<(isize, isize)> = (0..grid.dim)
            .map(|i| {
                let lo = ((p.center[i] - p.radius) / h).floor() as isize - 1;
                let hi = ((p.center[i] + p.radius) / h).ceil() as isize + 1;
                (lo, hi)
            })
            .collect();
        let clamp = |v: isize| -> Option<usize> {
            if periodic {
                Some(v.rem_euclid(n) as usize)
            } else if (0..n).contains(&v) {
                Some(v as usize)
            } else {
                None
            }
        };
        let zr = if grid.dim == 3 { lo_hi[2] } else { (0, 0) };
        for cz in zr.0..=zr.1 {
            let Some(z) = (if grid.dim == 3 { clamp(cz) } else { Some(0) }) else { continue };
            for cy in lo_hi[1].0..=lo_hi[1].1 {
                let Some(y) = clamp(cy) else { continue };
                for cx in lo_hi[0].0..=lo_hi[0].1 {
                    let Some(x) = clamp(cx) else { continue };
                    // sample positions in the unwrapped frame of the particle
                    let base = [cx as f64 * h, cy as f64 * h, cz as f64 * h];
                    let mut covered = 0usize;
                    let sub_count = sub_n.pow(grid.dim as u32);
                    for s in 0..sub_count {
                        let mut pt = [0.0; 3];
                        let mut rem = s;
                        for i in 0..grid.dim {
                            pt[i] = base[i] + subs[rem % sub_n] * h;
                            rem /= sub_n;
                        }
                        let d = if periodic {
                            norm(periodic_delta(pt, p.center, config.domain.side(), grid.dim), grid.dim)
                        } else {
                            norm(sub(pt, p.center), grid.dim)
                        };
                        if d <= p.radius {
                            covered += 1;
                        }
                    }
                    if covered > 0 {
                        let cell = grid.idx([x, y, z]);
                        chi[cell] = (chi[cell] + covered as f64 * weight).min(1.0);
                    }
                }
            }
        }
    }
    Ok(chi)
}

/// Sharp indicator of the particle cores: cells whose center lies inside a
/// particle with clearance `margin_cells * h` from its surface. Rigidity
/// residuals are measured here, away from the O(h) interface layer that the
/// staggered discretization cannot resolve.
pub fn core_indicator(config: &ParticleConfig, grid: &Grid, margin_cells: f64) -> Vec<f64> {
    let periodic = matches!(config.domain, Domain::Periodic { .. });
    let margin = margin_cells * grid.h;
    grid.cells_iter()
        .map(|c| {
            let x = grid.cell_center(c);
            let inside = config.particles.iter().any(|p| {
                let d = if periodic {
                    norm(periodic_delta(x, p.center, config.domain.side(), grid.dim), grid.dim)
                } else {
                    norm(sub(x, p.center), grid.dim)
                };
                d <= p.radius - margin
            });
            if inside {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Penalized viscosity field over the cells of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViscosityField {
    pub grid: Grid,
    pub chi: Vec<f64>,
    pub kappa: f64,
}

impl ViscosityField {
    pub fn new(grid: Grid, chi: Vec<f64>, kappa: f64) -> Result<Self, StokesError> {
        if chi.len() != grid.cells() {
            return Err(StokesError::InvalidParameter(format!(
                "chi length {} != cell count {}",
                chi.len(),
                grid.cells()
            )));
        }
        if kappa < 1.0 {
            return Err(StokesError::InvalidParameter(format!("kappa = {kappa} must be >= 1")));
        }
        if chi.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(StokesError::InvalidParameter("chi outside [0, 1]".into()));
        }
        Ok(ViscosityField { grid, chi, kappa })
    }

    pub fn uniform(grid: Grid) -> Self {
        ViscosityField { grid, chi: vec![0.0; grid.cells()], kappa: 1.0 }
    }

    #[inline]
    pub fn mu(&self, cell: usize) -> f64 {
        1.0 + (self.kappa - 1.0) * self.chi[cell]
    }

    /// Particle volume fraction measured on the grid.
    pub fn fraction(&self) -> f64 {
        crate::geom::kahan_sum(self.chi.iter().copied()) / self.chi.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{Domain, Particle};
    use crate::stokes::grid::BoundaryKind;

    #[test]
    fn empty_config_all_zero() {
        let grid = Grid::new(2, 32, 1.0, BoundaryKind::Periodic).unwrap();
        let cfg = ParticleConfig {
            dim: 2,
            domain: Domain::Periodic { side: 1.0 },
            particles: vec![],
            delta: 0.05,
            seed: 0,
        };
        let chi = rasterize(&cfg, &grid).unwrap();
        assert!(chi.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn disk_area_one_percent() {
        let grid = Grid::new(2, 256, 1.0, BoundaryKind::Periodic).unwrap();
        let cfg = ParticleConfig {
            dim: 2,
            domain: Domain::Periodic { side: 1.0 },
            particles: vec![Particle { center: [0.5, 0.5, 0.0], radius: 0.25 }],
            delta: 0.05,
            seed: 0,
        };
        let chi = rasterize(&cfg, &grid).unwrap();
        let area: f64 = chi.iter().sum::<f64>() * grid.h * grid.h;
        let exact = std::f64::consts::PI / 16.0;
        assert!((area / exact - 1.0).abs() < 0.01, "area = {area}, exact = {exact}");
        // a cell fully inside the particle is exactly 1
        let inner = grid.idx([128, 128, 0]);
        assert_eq!(chi[inner], 1.0);
    }

    #[test]
    fn wrapped_particle_periodic() {
        let grid = Grid::new(2, 64, 1.0, BoundaryKind::Periodic).unwrap();
        let cfg = ParticleConfig {
            dim: 2,
            domain: Domain::Periodic { side: 1.0 },
            particles: vec![Particle { center: [0.0, 0.0, 0.0], radius: 0.2 }],
            delta: 0.05,
            seed: 0,
        };
        let chi = rasterize(&cfg, &grid).unwrap();
        let area: f64 = chi.iter().sum::<f64>() * grid.h * grid.h;
        let exact = std::f64::consts::PI * 0.04;
        assert!((area / exact - 1.0).abs() < 0.02, "area = {area}");
        // mass present in all four corners
        assert!(chi[grid.idx([0, 0, 0])] == 1.0);
        assert!(chi[grid.idx([63, 63, 0])] == 1.0);
    }

    #[test]
    fn under_resolved_rejected() {
        let grid = Grid::new(2, 16, 1.0, BoundaryKind::Periodic).unwrap();
        let cfg = ParticleConfig {
            dim: 2,
            domain: Domain::Periodic { side: 1.0 },
            particles: vec![Particle { center: [0.5, 0.5, 0.0], radius: 0.05 }],
            delta: 0.01,
            seed: 0,
        };
        assert!(matches!(rasterize(&cfg, &grid), Err(StokesError::UnderResolved { .. })));
    }

    #[test]
    fn ball_volume_3d() {
        let grid = Grid::new(3, 48, 1.0, BoundaryKind::Periodic).unwrap();
        let cfg = ParticleConfig {
            dim: 3,
            domain: Domain::Periodic { side: 1.0 },
            particles: vec![Particle { center: [0.5, 0.5, 0.5], radius: 0.25 }],
            delta: 0.05,
            seed: 0,
        };
        let chi = rasterize(&cfg, &grid).unwrap();
        let vol: f64 = chi.iter().sum::<f64>() * grid.h.powi(3);
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 0.25f64.powi(3);
        assert!((vol / exact - 1.0).abs() < 0.01, "vol = {vol}, exact = {exact}");
    }
}
