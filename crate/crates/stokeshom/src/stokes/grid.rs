//! Staggered-grid plumbing: grid descriptor, solver parameters, flow state.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StokesError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("under-resolved: particle radius {radius} < 2h = {min}")]
    UnderResolved { radius: f64, min: f64 },
    #[error("ill-posed problem: {0}")]
    IllPosed(String),
    #[error("no convergence after {iterations} iterations (momentum residual {residual_mom:.3e}, divergence {residual_div:.3e})")]
    NoConvergence { iterations: usize, residual_mom: f64, residual_div: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    Periodic,
    Dirichlet,
}

/// Regular grid of N^d cells over [0, len]^d with MAC staggering: pressure at
/// cell centers, velocity component i on faces normal to axis i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
    pub len: f64,
    pub h: f64,
    pub kind: BoundaryKind,
}

impl Grid {
    pub fn new(dim: usize, n: usize, len: f64, kind: BoundaryKind) -> Result<Self, StokesError> {
        if dim < 2 || dim > 3 {
            return Err(StokesError::InvalidParameter(format!("dim must be 2 or 3, got {dim}")));
        }
        if n < 16 {
            return Err(StokesError::InvalidParameter(format!("N = {n} below the minimum of 16")));
        }
        if !(len > 0.0) {
            return Err(StokesError::InvalidParameter(format!("box length {len} must be positive")));
        }
        Ok(Grid { dim, n, len, h: len / n as f64, kind })
    }

    pub fn cells(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Extents for row-major indexing (x fastest); trailing axes are 1.
    pub fn dims(&self) -> [usize; 3] {
        [self.n, self.n, if self.dim == 3 { self.n } else { 1 }]
    }

    pub fn idx(&self, c: [usize; 3]) -> usize {
        c[0] + self.n * (c[1] + if self.dim == 3 { self.n * c[2] } else { 0 })
    }

    /// Cell index shifted by `step` along `axis` with periodic wrap.
    pub fn shift(&self, c: [usize; 3], axis: usize, step: isize) -> [usize; 3] {
        let mut out = c;
        let n = self.n as isize;
        out[axis] = ((c[axis] as isize + step).rem_euclid(n)) as usize;
        out
    }

    pub fn cell_center(&self, c: [usize; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for i in 0..self.dim {
            x[i] = (c[i] as f64 + 0.5) * self.h;
        }
        x
    }

    /// Iterate all cell multi-indices.
    pub fn cells_iter(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let n = self.n;
        let nz = if self.dim == 3 { n } else { 1 };
        (0..nz).flat_map(move |z| (0..n).flat_map(move |y| (0..n).map(move |x| [x, y, z])))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub tol_mom: f64,
    pub tol_div: f64,
    pub max_iter: usize,
    pub kappa: f64,
}

impl SolverParams {
    pub fn new(kappa: f64) -> Self {
        SolverParams { tol_mom: 1e-8, tol_div: 1e-8, max_iter: 50_000, kappa }
    }

    pub fn validate(&self) -> Result<(), StokesError> {
        for (name, tol) in [("tol_mom", self.tol_mom), ("tol_div", self.tol_div)] {
            if !(tol > 0.0 && tol <= 1e-3) {
                return Err(StokesError::InvalidParameter(format!(
                    "{name} = {tol} outside (0, 1e-3]"
                )));
            }
        }
        if self.kappa < 1.0 {
            return Err(StokesError::InvalidParameter(format!(
                "kappa = {} must be >= 1",
                self.kappa
            )));
        }
        Ok(())
    }
}

/// Converged discrete flow: velocity per staggered component, cell pressure,
/// and the final residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub grid: Grid,
    /// One flat array per velocity component; layout depends on the boundary
    /// kind (see the periodic and Dirichlet solver modules).
    pub velocity: Vec<Vec<f64>>,
    pub pressure: Vec<f64>,
    pub residual_mom: f64,
    pub residual_div: f64,
    pub iterations: usize,
}
