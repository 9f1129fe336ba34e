//! Random sequential adsorption with per-proposal minimum-gap draws.
//!
//! Proposals are drawn uniformly in the box; a proposal is accepted when its
//! surface gap to every already accepted particle (and, in the periodic case,
//! to its own images) exceeds a gap drawn from `min_gap_law`. Drawing the gap
//! per proposal lets heavy-tailed gap laws produce configurations with
//! controlled inverse-gap moments.

use super::{unit_ball_volume, Domain, EnsembleError, Particle, ParticleConfig};
use crate::geom::{norm, periodic_delta, sub};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// RSA jamming fractions for disks/balls; targets must stay strictly below.
fn jamming_bound(dim: usize) -> f64 {
    match dim {
        2 => 0.547,
        3 => 0.384,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DistributionLaw {
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
}

impl DistributionLaw {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            DistributionLaw::Fixed(v) => v,
            DistributionLaw::Uniform { lo, hi } => rng.gen_range(lo..hi),
        }
    }

    fn max(&self) -> f64 {
        match *self {
            DistributionLaw::Fixed(v) => v,
            DistributionLaw::Uniform { hi, .. } => hi,
        }
    }

    fn min(&self) -> f64 {
        match *self {
            DistributionLaw::Fixed(v) => v,
            DistributionLaw::Uniform { lo, .. } => lo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RsaTarget {
    Count(usize),
    Fraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsaParams {
    pub seed: u64,
    pub dim: usize,
    pub box_side: f64,
    pub periodic: bool,
    pub target: RsaTarget,
    pub radius_law: DistributionLaw,
    pub min_gap_law: DistributionLaw,
    pub delta: f64,
    /// Proposal budget per requested particle before giving up.
    pub max_attempts_per_particle: usize,
}

impl RsaParams {
    pub fn new(seed: u64, dim: usize, box_side: f64, target: RsaTarget) -> Self {
        RsaParams {
            seed,
            dim,
            box_side,
            periodic: true,
            target,
            radius_law: DistributionLaw::Fixed(0.5),
            min_gap_law: DistributionLaw::Fixed(0.05),
            delta: 0.05,
            max_attempts_per_particle: 20_000,
        }
    }
}

pub fn generate_rsa(params: &RsaParams) -> Result<ParticleConfig, EnsembleError> {
    let p = params;
    if !(p.box_side >= 4.0) {
        return Err(EnsembleError::InvalidParameter(format!(
            "box side must be >= 4, got {}",
            p.box_side
        )));
    }
    if p.dim < 2 || p.dim > 3 {
        return Err(EnsembleError::InvalidParameter(format!("dim must be 2 or 3, got {}", p.dim)));
    }
    if p.radius_law.min() < p.delta || p.radius_law.max() > 1.0 {
        return Err(EnsembleError::InvalidParameter(format!(
            "radius law range [{}, {}] must lie in [delta, 1] = [{}, 1]",
            p.radius_law.min(),
            p.radius_law.max(),
            p.delta
        )));
    }
    if p.min_gap_law.min() < 0.0 {
        return Err(EnsembleError::InvalidParameter("min gap law must be nonnegative".into()));
    }
    let vol_box = p.box_side.powi(p.dim as i32);
    let wanted = match p.target {
        RsaTarget::Count(c) => c,
        RsaTarget::Fraction(f) => {
            if f < 0.0 || f >= jamming_bound(p.dim) {
                return Err(EnsembleError::InvalidParameter(format!(
                    "fraction {f} outside [0, {}) for d = {}",
                    jamming_bound(p.dim),
                    p.dim
                )));
            }
            // mean particle volume from the mean radius of the law
            let r_mean = 0.5 * (p.radius_law.min() + p.radius_law.max());
            let v_mean = unit_ball_volume(p.dim) * r_mean.powi(p.dim as i32);
            (f * vol_box / v_mean).round() as usize
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut particles: Vec<Particle> = Vec::with_capacity(wanted);
    let mut attempts = 0usize;
    let budget = p.max_attempts_per_particle * wanted.max(1);

    while particles.len() < wanted {
        if attempts >= budget {
            return Err(EnsembleError::TargetUnreachable {
                attempts,
                placed: particles.len(),
                wanted,
            });
        }
        attempts += 1;
        let radius = p.radius_law.draw(&mut rng);
        let mut center = [0.0f64; 3];
        for c in center.iter_mut().take(p.dim) {
            *c = rng.gen_range(0.0..p.box_side);
        }
        let min_gap = p.min_gap_law.draw(&mut rng);
        if !p.periodic {
            // keep particles strictly inside the bounded box with clearance
            let clear = radius + min_gap.max(0.0);
            if (0..p.dim).any(|i| center[i] < clear || center[i] > p.box_side - clear) {
                continue;
            }
        }
        let ok = particles.iter().all(|q| {
            let d = if p.periodic {
                norm(periodic_delta(center, q.center, p.box_side, p.dim), p.dim)
            } else {
                norm(sub(center, q.center), p.dim)
            };
            d - radius - q.radius > min_gap
        });
        // periodic self-image clearance
        let self_ok = !p.periodic || p.box_side - 2.0 * radius > min_gap;
        if ok && self_ok {
            particles.push(Particle { center, radius });
        }
    }

    let config = ParticleConfig {
        dim: p.dim,
        domain: if p.periodic {
            Domain::Periodic { side: p.box_side }
        } else {
            Domain::Bounded { side: p.box_side }
        },
        particles,
        delta: p.delta,
        seed: p.seed,
    };
    config.validate()?;
    Ok(config)
}
