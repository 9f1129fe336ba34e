//! Random hardcore particle configurations and their gap statistics.
//!
//! A configuration is a finite realization of a stationary hardcore ensemble:
//! disks (d = 2) or balls (d = 3) with radii in `[delta, 1]`, pairwise
//! disjoint closures, living either in a periodic cell or in a bounded box.
//! On top of generation this module measures the two notions of interparticle
//! distance (half surface gap, and the refined gap seen through admissible
//! parabolic domains), truncated Voronoi membership, and the inverse-gap
//! moment statistics that control the homogenization regime.

mod gaps;
mod moments;
mod rsa;

pub use gaps::{in_neighborhood, rho_circ, rho_refined, ContactSite, GapRecord, GapSampling};
pub use moments::{lambda_statistic, moment_statistic, mu_r, select_particles, MomentReport};
pub use rsa::{generate_rsa, DistributionLaw, RsaParams, RsaTarget};

use crate::geom::{norm, periodic_delta, sub, Point};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("target unreachable after {attempts} attempts ({placed} of {wanted} particles placed)")]
    TargetUnreachable {
        attempts: usize,
        placed: usize,
        wanted: usize,
    },
    #[error("particle {0} has no neighbor in a non-periodic domain")]
    NoNeighbor(usize),
    #[error("no admissible parabolic fit at boundary point {point:?} of particle {index} (regularity violation)")]
    FitFailure { index: usize, point: Point },
    #[error("particle index {0} out of range")]
    BadIndex(usize),
}

/// Domain the particles live in: a periodic cell or a bounded box, both of
/// side length `L` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Periodic { side: f64 },
    Bounded { side: f64 },
}

impl Domain {
    pub fn side(&self) -> f64 {
        match self {
            Domain::Periodic { side } | Domain::Bounded { side } => *side,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Domain::Periodic { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub center: Point,
    pub radius: f64,
}

/// One realization of the random inclusion set: centers, radii, domain, and
/// the regularity constant `delta` (interior ball radius and dilation width).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleConfig {
    pub dim: usize,
    pub domain: Domain,
    pub particles: Vec<Particle>,
    pub delta: f64,
    pub seed: u64,
}

impl ParticleConfig {
    /// Surface-to-surface distance between particles `n` and `m`
    /// (minimum-image in the periodic case; may be negative for overlaps).
    pub fn surface_gap(&self, n: usize, m: usize) -> f64 {
        let a = &self.particles[n];
        let b = &self.particles[m];
        let d = match self.domain {
            Domain::Periodic { side } => {
                norm(periodic_delta(a.center, b.center, side, self.dim), self.dim)
            }
            Domain::Bounded { .. } => norm(sub(a.center, b.center), self.dim),
        };
        d - a.radius - b.radius
    }

    /// Distance from a point to the (closed) particle `n`, minimum-image when
    /// periodic. Zero inside.
    pub fn dist_to_particle(&self, x: Point, n: usize) -> f64 {
        let p = &self.particles[n];
        let d = match self.domain {
            Domain::Periodic { side } => {
                norm(periodic_delta(x, p.center, side, self.dim), self.dim)
            }
            Domain::Bounded { .. } => norm(sub(x, p.center), self.dim),
        };
        (d - p.radius).max(0.0)
    }

    /// Distance from a point to the domain boundary (infinite for periodic).
    pub fn dist_to_boundary(&self, x: Point) -> f64 {
        match self.domain {
            Domain::Periodic { .. } => f64::INFINITY,
            Domain::Bounded { side } => {
                let mut d = f64::INFINITY;
                for i in 0..self.dim {
                    d = d.min(x[i]).min(side - x[i]);
                }
                d
            }
        }
    }

    /// Volume fraction covered by the particles (exact, hardcore).
    pub fn volume_fraction(&self) -> f64 {
        let l = self.domain.side();
        let vol: f64 = self
            .particles
            .iter()
            .map(|p| unit_ball_volume(self.dim) * p.radius.powi(self.dim as i32))
            .sum();
        vol / l.powi(self.dim as i32)
    }

    /// Check all structural invariants, returning the first violation.
    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.dim < 2 || self.dim > 3 {
            return Err(EnsembleError::InvalidParameter(format!(
                "dim must be 2 or 3, got {}",
                self.dim
            )));
        }
        if !(self.domain.side() > 0.0) {
            return Err(EnsembleError::InvalidParameter("box side must be positive".into()));
        }
        if !(self.delta > 0.0) {
            return Err(EnsembleError::InvalidParameter("delta must be positive".into()));
        }
        for (i, p) in self.particles.iter().enumerate() {
            if p.radius < self.delta || p.radius > 1.0 {
                return Err(EnsembleError::InvalidParameter(format!(
                    "particle {i}: radius {} outside [delta, 1] = [{}, 1]",
                    p.radius, self.delta
                )));
            }
        }
        for n in 0..self.particles.len() {
            // periodic self-images must be disjoint too
            if self.domain.is_periodic() {
                let l = self.domain.side();
                if l - 2.0 * self.particles[n].radius <= 0.0 {
                    return Err(EnsembleError::InvalidParameter(format!(
                        "particle {n} overlaps its own periodic image"
                    )));
                }
            }
            for m in (n + 1)..self.particles.len() {
                if self.surface_gap(n, m) <= 0.0 {
                    return Err(EnsembleError::InvalidParameter(format!(
                        "particles {n} and {m} are not strictly disjoint"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        2 => std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI / 3.0,
        _ => panic!("unsupported dimension {dim}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_disks(gap: f64) -> ParticleConfig {
        ParticleConfig {
            dim: 2,
            domain: Domain::Bounded { side: 10.0 },
            particles: vec![
                Particle { center: [4.0, 5.0, 0.0], radius: 0.5 },
                Particle { center: [5.0 + gap, 5.0, 0.0], radius: 0.5 },
            ],
            delta: 0.1,
            seed: 0,
        }
    }

    #[test]
    fn surface_gap_two_disks() {
        let cfg = two_disks(0.02);
        assert!((cfg.surface_gap(0, 1) - 0.02).abs() < 1e-14);
        cfg.validate().unwrap();
    }

    #[test]
    fn overlap_rejected() {
        let cfg = two_disks(-0.01);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn volume_fraction_single_disk() {
        let cfg = ParticleConfig {
            dim: 2,
            domain: Domain::Periodic { side: 10.0 },
            particles: vec![Particle { center: [0.0; 3], radius: 0.5 }],
            delta: 0.1,
            seed: 0,
        };
        assert!((cfg.volume_fraction() - std::f64::consts::PI * 0.25 / 100.0).abs() < 1e-15);
    }
}
