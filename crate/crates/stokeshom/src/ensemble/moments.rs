//! Inverse-gap moment statistics and the gap-singularity weight `mu_r`.

use super::{EnsembleError, GapRecord, ParticleConfig};
use crate::geom::kahan_sum;
use serde::{Deserialize, Serialize};

/// Piecewise gap-singularity weight. Exponents within 1e-9 of the critical
/// value `(d + 1)/3` are routed to the logarithmic branch.
pub fn mu_r(rho: f64, r: f64, dim: usize) -> Result<f64, EnsembleError> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(EnsembleError::InvalidParameter(format!("rho = {rho} outside (0, 1]")));
    }
    if r < 1.0 {
        return Err(EnsembleError::InvalidParameter(format!("r = {r} must be >= 1")));
    }
    let critical = (dim as f64 + 1.0) / 3.0;
    Ok(if (r - critical).abs() <= 1e-9 {
        rho.ln().abs().powf(1.0 / r)
    } else if r > critical {
        rho.powf((dim as f64 + 1.0) / (2.0 * r) - 1.5)
    } else {
        1.0
    })
}

/// Indices of particles selected at scale `eps`: fully inside the box with
/// clearance at least `delta` from the boundary (the lower set of the
/// selection sandwich).
pub fn select_particles(config: &ParticleConfig) -> Vec<usize> {
    let side = config.domain.side();
    if config.domain.is_periodic() {
        return (0..config.particles.len()).collect();
    }
    (0..config.particles.len())
        .filter(|&n| {
            let p = &config.particles[n];
            (0..config.dim).all(|i| {
                p.center[i] - p.radius >= config.delta && p.center[i] + p.radius <= side - config.delta
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub gamma: f64,
    pub eps: f64,
    /// eps^d * sum over selected particles of rho^{-gamma}.
    pub value: f64,
    /// Flag set when some rho = 0 made the statistic infinite.
    pub zero_gap: bool,
    pub selected: Vec<usize>,
    /// Per-particle mu_r values for the (r, p) pair used in `lambda`.
    pub per_particle_mu: Vec<f64>,
    pub lambda: Option<f64>,
}

/// The scaled inverse-gap moment of the selected particles, with the
/// aggregate Lambda statistic computed on request for a pair `(r, p)`.
pub fn moment_statistic(
    config: &ParticleConfig,
    eps: f64,
    gamma: f64,
    gaps: &[GapRecord],
    lambda_rp: Option<(f64, f64)>,
) -> Result<MomentReport, EnsembleError> {
    if !(eps > 0.0) {
        return Err(EnsembleError::InvalidParameter(format!("eps = {eps} must be positive")));
    }
    let selected = select_particles(config);
    let mut zero_gap = false;
    let terms: Vec<f64> = selected
        .iter()
        .map(|&n| {
            let rho = gaps
                .iter()
                .find(|g| g.index == n)
                .map(|g| g.rho_refined)
                .unwrap_or(f64::NAN);
            if rho <= 0.0 && gamma > 0.0 {
                zero_gap = true;
                f64::INFINITY
            } else {
                rho.powf(-gamma)
            }
        })
        .collect();
    let value = eps.powi(config.dim as i32) * kahan_sum(terms.iter().copied());

    let (per_particle_mu, lambda) = match lambda_rp {
        None => (Vec::new(), None),
        Some((r, p)) => {
            let mus: Result<Vec<f64>, _> = selected
                .iter()
                .map(|&n| {
                    let rho = gaps
                        .iter()
                        .find(|g| g.index == n)
                        .map(|g| g.rho_refined.min(1.0))
                        .unwrap_or(f64::NAN);
                    mu_r(rho, r, config.dim)
                })
                .collect();
            let mus = mus?;
            let lam = lambda_from_mus(config, &mus, p);
            (mus, Some(lam))
        }
    };

    Ok(MomentReport { gamma, eps, value, zero_gap, selected, per_particle_mu, lambda })
}

fn lambda_from_mus(config: &ParticleConfig, mus: &[f64], p: f64) -> f64 {
    let vol = config.domain.side().powi(config.dim as i32);
    let sum = kahan_sum(mus.iter().map(|m| m.powf(p)));
    (vol + sum).powf(1.0 / p)
}

/// Lambda statistic over the whole configuration box, for exponents (r, p).
pub fn lambda_statistic(
    config: &ParticleConfig,
    gaps: &[GapRecord],
    r: f64,
    p: f64,
) -> Result<f64, EnsembleError> {
    let mus: Result<Vec<f64>, _> = gaps
        .iter()
        .map(|g| mu_r(g.rho_refined.min(1.0), r, config.dim))
        .collect();
    Ok(lambda_from_mus(config, &mus?, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{Domain, Particle};

    #[test]
    fn mu_r_branches() {
        // singular branch: d = 3, r = 2 -> rho^{-1/2}
        assert!((mu_r(0.01, 2.0, 3).unwrap() - 10.0).abs() < 1e-12);
        // logarithmic branch: d = 2, r = 1 = (d + 1)/3
        assert!((mu_r(0.25, 1.0, 2).unwrap() - 4.0f64.ln()).abs() < 1e-12);
        // constant branch: d = 5 surrogate (r < (d+1)/3)
        let c = (5.0f64 + 1.0) / 3.0;
        assert!(1.0 < c);
        // use d = 3, r = 1 < 4/3
        assert!((mu_r(0.5, 1.0, 3).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mu_r_rejects_bad_input() {
        assert!(mu_r(0.0, 2.0, 3).is_err());
        assert!(mu_r(1.5, 2.0, 3).is_err());
        assert!(mu_r(0.5, 0.5, 3).is_err());
    }

    fn gap(index: usize, rho: f64) -> GapRecord {
        GapRecord { index, rho_circ: rho, rho_refined: rho, nearest_neighbor: None, contact_sites: vec![] }
    }

    fn boxed(dim: usize, side: f64, particles: Vec<Particle>) -> ParticleConfig {
        ParticleConfig { dim, domain: Domain::Bounded { side }, particles, delta: 0.05, seed: 0 }
    }

    #[test]
    fn worked_example() {
        // d = 3, eps = 0.1, rho in {0.01, 0.04}, gamma = 3/2 -> 1.125
        let cfg = boxed(
            3,
            10.0,
            vec![
                Particle { center: [3.0, 3.0, 3.0], radius: 0.5 },
                Particle { center: [6.0, 6.0, 6.0], radius: 0.5 },
            ],
        );
        let gaps = vec![gap(0, 0.01), gap(1, 0.04)];
        let rep = moment_statistic(&cfg, 0.1, 1.5, &gaps, None).unwrap();
        assert!((rep.value - 1.125).abs() < 1e-12, "value = {}", rep.value);
        assert!(!rep.zero_gap);
    }

    #[test]
    fn empty_selection_is_zero() {
        let cfg = boxed(3, 10.0, vec![]);
        let rep = moment_statistic(&cfg, 0.1, 1.5, &[], None).unwrap();
        assert_eq!(rep.value, 0.0);
    }

    #[test]
    fn zero_gap_flagged_infinite() {
        let cfg = boxed(
            3,
            10.0,
            vec![Particle { center: [5.0, 5.0, 5.0], radius: 0.5 }],
        );
        let rep = moment_statistic(&cfg, 0.1, 1.5, &[gap(0, 0.0)], None).unwrap();
        assert!(rep.zero_gap);
        assert!(rep.value.is_infinite());
    }

    #[test]
    fn additive_over_subsets() {
        let cfg = boxed(
            3,
            10.0,
            vec![
                Particle { center: [2.0, 2.0, 2.0], radius: 0.5 },
                Particle { center: [5.0, 5.0, 5.0], radius: 0.5 },
                Particle { center: [8.0, 8.0, 8.0], radius: 0.5 },
            ],
        );
        let gaps = vec![gap(0, 0.02), gap(1, 0.03), gap(2, 0.07)];
        let whole = moment_statistic(&cfg, 0.2, 1.0, &gaps, None).unwrap().value;
        let parts: f64 = (0..3)
            .map(|n| {
                let sub = boxed(3, 10.0, vec![cfg.particles[n]]);
                let mut g = gaps[n].clone();
                g.index = 0;
                moment_statistic(&sub, 0.2, 1.0, &[g], None).unwrap().value
            })
            .sum();
        assert!((whole - parts).abs() < 1e-12 * whole.abs().max(1.0));
    }
}
