//! Persistence formats: CSV tables, JSON result documents, and flat binary
//! field dumps with a JSON sidecar. All emitters are deterministic string or
//! byte builders; file placement is the caller's concern.

use crate::cutoff::{ScalingReport, SlopePrediction};
use crate::effective::{ConfigResult, EstimatorKind};
use crate::ensemble::{GapRecord, ParticleConfig};
use crate::homogenize::HomReport;
use crate::stokes::Grid;
use serde::{Deserialize, Serialize};

/// One particle per row: `n,x_1,..,x_d,radius`.
pub fn particles_csv(config: &ParticleConfig) -> String {
    let mut out = String::new();
    out.push_str("n,");
    for i in 0..config.dim {
        out.push_str(&format!("x_{},", i + 1));
    }
    out.push_str("radius\n");
    for (n, p) in config.particles.iter().enumerate() {
        out.push_str(&format!("{n},"));
        for i in 0..config.dim {
            out.push_str(&format!("{},", p.center[i]));
        }
        out.push_str(&format!("{}\n", p.radius));
    }
    out
}

/// Inverse of [`particles_csv`]: rebuilds a configuration from the CSV body
/// plus the metadata the table does not carry.
pub fn parse_particles_csv(
    csv: &str,
    domain: crate::ensemble::Domain,
    delta: f64,
    seed: u64,
) -> Result<ParticleConfig, String> {
    let mut lines = csv.lines();
    let header = lines.next().ok_or("empty particle table")?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[0] != "n" || cols[cols.len() - 1] != "radius" {
        return Err(format!("unrecognized particle header: {header}"));
    }
    let dim = cols.len() - 2;
    if dim != 2 && dim != 3 {
        return Err(format!("particle table implies dimension {dim}"));
    }
    let mut particles = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(format!("row {k}: expected {} fields, got {}", cols.len(), fields.len()));
        }
        let mut center = [0.0f64; 3];
        for i in 0..dim {
            center[i] = fields[i + 1]
                .parse()
                .map_err(|e| format!("row {k}, column {}: {e}", cols[i + 1]))?;
        }
        let radius: f64 =
            fields[dim + 1].parse().map_err(|e| format!("row {k}, column radius: {e}"))?;
        particles.push(crate::ensemble::Particle { center, radius });
    }
    Ok(ParticleConfig { dim, domain, particles, delta, seed })
}

/// Gap report rows: `n,rho_circ,rho_refined,nearest` (empty nearest for an
/// isolated particle).
pub fn gaps_csv(records: &[GapRecord]) -> String {
    let mut out = String::from("n,rho_circ,rho_refined,nearest\n");
    for g in records {
        let nearest = g.nearest_neighbor.map(|m| m.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", g.index, g.rho_circ, g.rho_refined, nearest));
    }
    out
}

/// Norm samples of the scaling study: `d,r,kind,rho,norm`.
pub fn scaling_csv(reports: &[ScalingReport]) -> String {
    let mut out = String::from("d,r,kind,rho,norm\n");
    for rep in reports {
        for &(rho, norm) in &rep.samples {
            out.push_str(&format!("{},{},{},{},{}\n", rep.dim, rep.r, rep.kind.label(), rho, norm));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSummary {
    pub dim: usize,
    pub r: f64,
    pub kind: String,
    pub fitted_slope: f64,
    pub predicted_slope: f64,
    pub logarithmic: bool,
    pub abs_error: f64,
    pub under_resolved: bool,
}

pub fn scaling_summary(reports: &[ScalingReport]) -> Vec<ScalingSummary> {
    reports
        .iter()
        .map(|rep| {
            let (predicted_slope, logarithmic) = match rep.predicted {
                SlopePrediction::Power(p) => (p, false),
                SlopePrediction::Logarithmic { inv_r } => (inv_r, true),
            };
            ScalingSummary {
                dim: rep.dim,
                r: rep.r,
                kind: rep.kind.label().to_string(),
                fitted_slope: rep.fitted_slope,
                predicted_slope,
                logarithmic,
                abs_error: rep.abs_error,
                under_resolved: rep.under_resolved,
            }
        })
        .collect()
}

/// Result document of one effective-viscosity run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveDoc {
    pub seed: u64,
    /// Ladder rungs; the extrapolated limit is reported separately.
    pub kappa: Vec<f64>,
    pub lambda: f64,
    /// Extrapolated energy-estimator matrix in strain-basis coordinates.
    pub b_matrix: Vec<Vec<f64>>,
    /// Extrapolated pressure-average components of the effective constant.
    pub b_vector: Vec<f64>,
    pub estimator: String,
    pub residuals: Residuals,
    pub monotone: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub momentum: f64,
    pub divergence: f64,
}

pub fn effective_doc(seed: u64, kappa_ladder: &[f64], result: &ConfigResult) -> EffectiveDoc {
    EffectiveDoc {
        seed,
        kappa: kappa_ladder.to_vec(),
        lambda: result.lambda,
        b_matrix: result.extrapolated.matrix.clone(),
        b_vector: result.b_limit.clone(),
        estimator: estimator_label(result.extrapolated.estimator).to_string(),
        residuals: Residuals {
            momentum: result.residual_mom,
            divergence: result.residual_div,
        },
        monotone: result.monotone,
    }
}

pub fn estimator_label(kind: EstimatorKind) -> &'static str {
    match kind {
        EstimatorKind::Energy => "energy",
        EstimatorKind::Flux => "flux",
        EstimatorKind::BoundaryIntegral => "boundary-integral",
        EstimatorKind::PressureAverage => "pressure-average",
    }
}

/// Convergence table rows: `eps,h,err_L2,err_H1_naive,err_H1_corrected,err_pressure,moment_stat`.
pub fn hom_csv(report: &HomReport) -> String {
    let mut out =
        String::from("eps,h,err_L2,err_H1_naive,err_H1_corrected,err_pressure,moment_stat\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.eps, r.h, r.err_l2, r.err_h1_naive, r.err_h1_corrected, r.err_pressure, r.moment_stat
        ));
    }
    out
}

/// Sidecar metadata of a flat binary field dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub dims: Vec<usize>,
    pub spacing: f64,
    pub layout: String,
    pub endianness: String,
    pub dtype: String,
}

impl FieldSidecar {
    pub fn for_grid(grid: &Grid, dims: Vec<usize>) -> Self {
        FieldSidecar {
            dims,
            spacing: grid.h,
            layout: "row-major-x-fastest".to_string(),
            endianness: "little".to_string(),
            dtype: "f64".to_string(),
        }
    }
}

/// Little-endian f64 dump of a field.
pub fn field_bytes(data: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() * 8);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn field_from_bytes(bytes: &[u8]) -> Result<Vec<f64>, String> {
    if bytes.len() % 8 != 0 {
        return Err(format!("byte length {} is not a multiple of 8", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// 1D slice of a flat x-fastest field along `axis`, holding the other
/// indices at `fixed`: rows `coordinate,value`.
pub fn slice_csv(
    data: &[f64],
    dims: &[usize],
    spacing: f64,
    axis: usize,
    fixed: &[usize],
) -> Result<String, String> {
    if axis >= dims.len() {
        return Err(format!("axis {axis} out of range for {} dims", dims.len()));
    }
    if fixed.len() != dims.len() - 1 {
        return Err(format!("expected {} fixed indices, got {}", dims.len() - 1, fixed.len()));
    }
    if data.len() != dims.iter().product::<usize>() {
        return Err(format!("field length {} does not match dims {dims:?}", data.len()));
    }
    let mut index = vec![0usize; dims.len()];
    let mut k = 0;
    for (d, &i) in (0..dims.len()).filter(|&d| d != axis).zip(fixed) {
        if i >= dims[d] {
            return Err(format!("fixed index {i} out of range for axis {d} of extent {}", dims[d]));
        }
        index[d] = i;
        k += 1;
    }
    debug_assert_eq!(k, fixed.len());
    let mut out = String::from("coordinate,value\n");
    for i in 0..dims[axis] {
        index[axis] = i;
        let mut flat = 0usize;
        for d in (0..dims.len()).rev() {
            flat = flat * dims[d] + index[d];
        }
        out.push_str(&format!("{},{}\n", (i as f64 + 0.5) * spacing, data[flat]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{Domain, Particle};

    #[test]
    fn particles_round_shape() {
        let cfg = ParticleConfig {
            dim: 2,
            domain: Domain::Periodic { side: 4.0 },
            particles: vec![Particle { center: [1.25, 2.5, 0.0], radius: 0.5 }],
            delta: 0.05,
            seed: 3,
        };
        let csv = particles_csv(&cfg);
        assert_eq!(csv, "n,x_1,x_2,radius\n0,1.25,2.5,0.5\n");
    }

    #[test]
    fn particles_csv_round_trip() {
        let cfg = ParticleConfig {
            dim: 2,
            domain: Domain::Periodic { side: 4.0 },
            particles: vec![
                Particle { center: [1.0 / 3.0, 2.5, 0.0], radius: 0.5 },
                Particle { center: [3.25, 0.125, 0.0], radius: 0.4375 },
            ],
            delta: 0.05,
            seed: 9,
        };
        let back =
            parse_particles_csv(&particles_csv(&cfg), cfg.domain, cfg.delta, cfg.seed).unwrap();
        assert_eq!(back, cfg);
        assert!(parse_particles_csv("bogus\n", cfg.domain, 0.05, 0).is_err());
    }

    #[test]
    fn gaps_csv_handles_missing_neighbor() {
        let recs = vec![GapRecord {
            index: 0,
            rho_circ: 0.125,
            rho_refined: 0.1,
            nearest_neighbor: None,
            contact_sites: vec![],
        }];
        let csv = gaps_csv(&recs);
        assert_eq!(csv, "n,rho_circ,rho_refined,nearest\n0,0.125,0.1,\n");
    }

    #[test]
    fn slice_extracts_rows() {
        // 3 x 2 field, x fastest: value = 10 * j + i
        let data = vec![0.0, 1.0, 2.0, 10.0, 11.0, 12.0];
        let along_x = slice_csv(&data, &[3, 2], 0.5, 0, &[1]).unwrap();
        assert_eq!(along_x, "coordinate,value\n0.25,10\n0.75,11\n1.25,12\n");
        let along_y = slice_csv(&data, &[3, 2], 0.5, 1, &[2]).unwrap();
        assert_eq!(along_y, "coordinate,value\n0.25,2\n0.75,12\n");
        assert!(slice_csv(&data, &[3, 2], 0.5, 2, &[0]).is_err());
        assert!(slice_csv(&data, &[3, 2], 0.5, 0, &[5]).is_err());
    }

    #[test]
    fn field_bytes_round_trip() {
        let data = vec![1.5, -2.25, 0.0, std::f64::consts::PI];
        let bytes = field_bytes(&data);
        assert_eq!(bytes.len(), 32);
        let back = field_from_bytes(&bytes).unwrap();
        assert_eq!(back, data);
        assert!(field_from_bytes(&bytes[..7]).is_err());
    }
}
