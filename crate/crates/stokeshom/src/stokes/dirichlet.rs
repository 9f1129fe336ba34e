//! No-slip Stokes solves on the unit square (d = 2): the heterogeneous
//! problem -div(2 mu D(u)) + grad S = f, div u = 0, u = 0 on the boundary,
//! and the homogenized problem with a constant anisotropic tensor B acting on
//! deviatoric strains.
//!
//! Staggered layout: u_x has (N-1) x N interior faces (value [i + (N-1) j] at
//! ((i+1)h, (j+1/2)h)), u_y has N x (N-1), pressure N x N cells. Boundary
//! faces carry u = 0 and tangential ghosts reflect with a minus sign, so the
//! shear strain at wall nodes is one-sided. The solver is the same projected
//! conjugate gradient scheme as the periodic one; the Leray projection uses a
//! DCT-II Poisson solve (Neumann pressure) and the preconditioner inverts the
//! component Laplacian by DST-I/DST-II.

use super::fft::{transform_axis, FftCache, RealTransform};
use super::grid::{BoundaryKind, FlowState, Grid, SolverParams, StokesError};
use super::visc::ViscosityField;
use crate::geom::KahanSum;

/// Velocity component extents: component 0 is (N-1) x N, component 1 is
/// N x (N-1).
pub fn comp_dims(n: usize, comp: usize) -> (usize, usize) {
    if comp == 0 {
        (n - 1, n)
    } else {
        (n, n - 1)
    }
}

pub fn zero_velocity(n: usize) -> Vec<Vec<f64>> {
    (0..2)
        .map(|c| {
            let (nx, ny) = comp_dims(n, c);
            vec![0.0; nx * ny]
        })
        .collect()
}

/// Position of the velocity value `(i, j)` of component `comp`.
pub fn face_position(grid: &Grid, comp: usize, i: usize, j: usize) -> [f64; 3] {
    let h = grid.h;
    if comp == 0 {
        [(i as f64 + 1.0) * h, (j as f64 + 0.5) * h, 0.0]
    } else {
        [(i as f64 + 0.5) * h, (j as f64 + 1.0) * h, 0.0]
    }
}

/// Cell-centered strains Dxx, Dyy (length N^2) with boundary faces at zero.
pub fn diag_strains(n: usize, h: f64, u: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let ux = &u[0];
    let uy = &u[1];
    let mut dxx = vec![0.0; n * n];
    let mut dyy = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let right = if i + 1 < n { ux[i + (n - 1) * j] } else { 0.0 };
            let left = if i > 0 { ux[i - 1 + (n - 1) * j] } else { 0.0 };
            dxx[i + n * j] = (right - left) / h;
            let top = if j + 1 < n { uy[i + n * j] } else { 0.0 };
            let bot = if j > 0 { uy[i + n * (j - 1)] } else { 0.0 };
            dyy[i + n * j] = (top - bot) / h;
        }
    }
    (dxx, dyy)
}

/// Node shear strain Dxy on the (N+1)^2 node lattice (positions (ih, jh)),
/// with antisymmetric tangential ghosts at the walls.
pub fn node_shear(n: usize, h: f64, u: &[Vec<f64>]) -> Vec<f64> {
    let ux = &u[0];
    let uy = &u[1];
    let m = n + 1;
    let mut dxy = vec![0.0; m * m];
    let get_ux = |k: usize, j: isize| -> f64 {
        // ghost reflection across the y = 0 and y = L walls
        if j < 0 {
            -ux[k]
        } else if j as usize >= n {
            -ux[k + (n - 1) * (n - 1)]
        } else {
            ux[k + (n - 1) * (j as usize)]
        }
    };
    let get_uy = |i: isize, l: usize| -> f64 {
        if i < 0 {
            -uy[n * l]
        } else if i as usize >= n {
            -uy[n - 1 + n * l]
        } else {
            uy[i as usize + n * l]
        }
    };
    for j in 0..m {
        for i in 0..m {
            let mut t = 0.0;
            if i >= 1 && i <= n - 1 {
                t += (get_ux(i - 1, j as isize) - get_ux(i - 1, j as isize - 1)) / h;
            }
            if j >= 1 && j <= n - 1 {
                t += (get_uy(i as isize, j - 1) - get_uy(i as isize - 1, j - 1)) / h;
            }
            dxy[i + m * j] = 0.5 * t;
        }
    }
    dxy
}

/// Transpose of the strain assembly: scatter cell diagonal stresses sdx, sdy
/// and node shear stress so back onto faces, dividing by h. Exactly the
/// adjoint of `diag_strains`/`node_shear` including the ghost reflections.
pub fn scatter_stress(n: usize, h: f64, sdx: &[f64], sdy: &[f64], so: &[f64]) -> Vec<Vec<f64>> {
    let m = n + 1;
    let mut out = zero_velocity(n);
    // u_x faces
    for j in 0..n {
        for i in 0..n - 1 {
            let mut v = (sdx[i + n * j] - sdx[i + 1 + n * j]) / h;
            // nodes (i+1, j) and (i+1, j+1); wall nodes carry coefficient 2
            let a = if j == 0 { 2.0 } else { 1.0 };
            let b = if j == n - 1 { 2.0 } else { 1.0 };
            v += (a * so[i + 1 + m * j] - b * so[i + 1 + m * (j + 1)]) / h;
            out[0][i + (n - 1) * j] = v;
        }
    }
    // u_y faces
    for j in 0..n - 1 {
        for i in 0..n {
            let mut v = (sdy[i + n * j] - sdy[i + n * (j + 1)]) / h;
            let a = if i == 0 { 2.0 } else { 1.0 };
            let b = if i == n - 1 { 2.0 } else { 1.0 };
            v += (a * so[i + m * (j + 1)] - b * so[i + 1 + m * (j + 1)]) / h;
            out[1][i + n * j] = v;
        }
    }
    out
}

fn dot(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut acc = KahanSum::default();
    for (x, y) in a.iter().zip(b) {
        for (u, v) in x.iter().zip(y) {
            acc.add(u * v);
        }
    }
    acc.value()
}

fn axpy(y: &mut [Vec<f64>], alpha: f64, x: &[Vec<f64>]) {
    for (yc, xc) in y.iter_mut().zip(x) {
        for (v, u) in yc.iter_mut().zip(xc) {
            *v += alpha * u;
        }
    }
}

/// Divergence at cells; boundary faces contribute zero.
pub fn divergence(n: usize, h: f64, u: &[Vec<f64>]) -> Vec<f64> {
    let (dxx, dyy) = diag_strains(n, h, u);
    dxx.iter().zip(&dyy).map(|(a, b)| a + b).collect()
}

/// Pressure gradient on interior faces.
pub fn gradient(n: usize, h: f64, p: &[f64]) -> Vec<Vec<f64>> {
    let mut out = zero_velocity(n);
    for j in 0..n {
        for i in 0..n - 1 {
            out[0][i + (n - 1) * j] = (p[i + 1 + n * j] - p[i + n * j]) / h;
        }
    }
    for j in 0..n - 1 {
        for i in 0..n {
            out[1][i + n * j] = (p[i + n * (j + 1)] - p[i + n * j]) / h;
        }
    }
    out
}

/// The variable-viscosity operator A u = -div_h(2 mu D(u)).
pub struct DirichletOps {
    pub grid: Grid,
    mu_cell: Vec<f64>,
    mu_node: Vec<f64>,
}

impl DirichletOps {
    pub fn new(mu: &ViscosityField) -> Self {
        let grid = mu.grid;
        let n = grid.n;
        let m = n + 1;
        let mu_cell: Vec<f64> = (0..grid.cells()).map(|c| mu.mu(c)).collect();
        let mut mu_node = vec![1.0; m * m];
        for j in 0..m {
            for i in 0..m {
                // harmonic mean over the adjacent cells that exist
                let mut inv = 0.0;
                let mut count = 0.0;
                for (ci, cj) in [(i as isize - 1, j as isize - 1), (i as isize, j as isize - 1), (i as isize - 1, j as isize), (i as isize, j as isize)] {
                    if (0..n as isize).contains(&ci) && (0..n as isize).contains(&cj) {
                        inv += 1.0 / mu_cell[ci as usize + n * cj as usize];
                        count += 1.0;
                    }
                }
                mu_node[i + m * j] = count / inv;
            }
        }
        DirichletOps { grid, mu_cell, mu_node }
    }

    pub fn apply(&self, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.grid.n;
        let h = self.grid.h;
        let (dxx, dyy) = diag_strains(n, h, u);
        let dxy = node_shear(n, h, u);
        let sdx: Vec<f64> = dxx.iter().zip(&self.mu_cell).map(|(d, m)| 2.0 * m * d).collect();
        let sdy: Vec<f64> = dyy.iter().zip(&self.mu_cell).map(|(d, m)| 2.0 * m * d).collect();
        let so: Vec<f64> = dxy.iter().zip(&self.mu_node).map(|(d, m)| 2.0 * m * d).collect();
        scatter_stress(n, h, &sdx, &sdy, &so)
    }

    /// Domain integral 2 int mu |D(u)|^2 dx.
    pub fn energy(&self, u: &[Vec<f64>]) -> f64 {
        let n = self.grid.n;
        let h = self.grid.h;
        let (dxx, dyy) = diag_strains(n, h, u);
        let dxy = node_shear(n, h, u);
        let mut acc = KahanSum::default();
        for c in 0..n * n {
            acc.add(2.0 * self.mu_cell[c] * (dxx[c] * dxx[c] + dyy[c] * dyy[c]));
        }
        for (idx, d) in dxy.iter().enumerate() {
            // full node weight: this is exactly the quadratic form whose
            // derivative is `apply`, so energy equals work for the solution
            acc.add(4.0 * self.mu_node[idx] * d * d);
        }
        acc.value() * h * h
    }

    /// RMS of |D(u)| over a cell-indicator region.
    pub fn strain_rms(&self, u: &[Vec<f64>], weight: &[f64]) -> f64 {
        let n = self.grid.n;
        let h = self.grid.h;
        let (dxx, dyy) = diag_strains(n, h, u);
        let dxy = node_shear(n, h, u);
        let m = n + 1;
        let mut num = KahanSum::default();
        let mut den = KahanSum::default();
        for j in 0..n {
            for i in 0..n {
                let c = i + n * j;
                // average the 4 surrounding node shears onto the cell
                let sh = 0.25
                    * (dxy[i + m * j] + dxy[i + 1 + m * j] + dxy[i + m * (j + 1)] + dxy[i + 1 + m * (j + 1)]);
                let v = dxx[c] * dxx[c] + dyy[c] * dyy[c] + 2.0 * sh * sh;
                num.add(weight[c] * v);
                den.add(weight[c]);
            }
        }
        if den.value() <= 0.0 {
            0.0
        } else {
            (num.value() / den.value()).sqrt()
        }
    }
}

/// Constant anisotropic tensor acting on deviatoric strains, given in the
/// orthonormal basis { (e11 - e22)/sqrt2, (e12 + e21)/sqrt2 }:
/// stress = 2 B dev(D). Used for the homogenized problem.
pub struct AnisoOps {
    pub grid: Grid,
    pub b: [[f64; 2]; 2],
}

impl AnisoOps {
    pub fn new(grid: Grid, b: [[f64; 2]; 2]) -> Result<Self, StokesError> {
        if (b[0][1] - b[1][0]).abs() > 1e-10 {
            return Err(StokesError::IllPosed("effective tensor not symmetric".into()));
        }
        let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
        if b[0][0] <= 0.0 || det <= 0.0 {
            return Err(StokesError::IllPosed("effective tensor not positive definite".into()));
        }
        Ok(AnisoOps { grid, b })
    }

    pub fn mean_viscosity(&self) -> f64 {
        0.5 * (self.b[0][0] + self.b[1][1])
    }

    pub fn apply(&self, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.grid.n;
        let h = self.grid.h;
        let m = n + 1;
        let [b11, b12, b22] = [self.b[0][0], self.b[0][1], self.b[1][1]];
        let (dxx, dyy) = diag_strains(n, h, u);
        let dxy = node_shear(n, h, u);
        let sqrt2 = std::f64::consts::SQRT_2;
        // P1 at cells, P2 at nodes, P2 averaged to cells for the cross term
        let p1: Vec<f64> = dxx.iter().zip(&dyy).map(|(a, b)| (a - b) / sqrt2).collect();
        let mut p2c = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                p2c[i + n * j] = sqrt2
                    * 0.25
                    * (dxy[i + m * j]
                        + dxy[i + 1 + m * j]
                        + dxy[i + m * (j + 1)]
                        + dxy[i + 1 + m * (j + 1)]);
            }
        }
        // conjugate stresses (see the energy form in the module docs):
        // cells: sdx = b11 (Dxx - Dyy) + sqrt2 b12 P2c, sdy = -sdx
        // nodes: so = 2 b22 Dxy + sqrt2 b12 (average of adjacent P1)
        let sdx: Vec<f64> = p1.iter().zip(&p2c).map(|(p, q)| sqrt2 * (b11 * p + b12 * q)).collect();
        let sdy: Vec<f64> = sdx.iter().map(|v| -v).collect();
        let mut so = vec![0.0; m * m];
        for j in 0..m {
            for i in 0..m {
                let mut avg = 0.0;
                let mut cnt = 0.0;
                for (ci, cj) in [(i as isize - 1, j as isize - 1), (i as isize, j as isize - 1), (i as isize - 1, j as isize), (i as isize, j as isize)] {
                    if (0..n as isize).contains(&ci) && (0..n as isize).contains(&cj) {
                        avg += p1[ci as usize + n * cj as usize];
                        cnt += 1.0;
                    }
                }
                // the quarter-weight average over existing cells; missing
                // cells contribute zero, matching the transpose exactly
                let p1avg = 0.25 * avg;
                let _ = cnt;
                so[i + m * j] = 2.0 * b22 * dxy[i + m * j] + sqrt2 * b12 * p1avg;
            }
        }
        scatter_stress(n, h, &sdx, &sdy, &so)
    }
}

/// DCT/DST solves for the no-slip grid.
pub struct DirichletSpectral {
    grid: Grid,
    cache: FftCache,
}

impl DirichletSpectral {
    pub fn new(grid: Grid) -> Self {
        DirichletSpectral { grid, cache: FftCache::default() }
    }

    fn lam(&self, mode: usize) -> f64 {
        // eigenvalue of -d^2/dx^2 for mode index `mode` (1-based frequency)
        let n = self.grid.n as f64;
        let s = (std::f64::consts::PI * mode as f64 / (2.0 * n)).sin();
        4.0 * s * s / (self.grid.h * self.grid.h)
    }

    /// Solve Delta_h q = rhs (Neumann), zero-mean; rhs must sum to zero.
    pub fn poisson(&mut self, rhs: &[f64]) -> Vec<f64> {
        let n = self.grid.n;
        let mut work = rhs.to_vec();
        transform_axis(&mut self.cache, &mut work, [n, n, 1], 0, RealTransform::Dct2);
        transform_axis(&mut self.cache, &mut work, [n, n, 1], 1, RealTransform::Dct2);
        for j in 0..n {
            for i in 0..n {
                let lam = self.lam(i) + self.lam(j);
                let id = i + n * j;
                work[id] = if lam == 0.0 { 0.0 } else { -work[id] / lam };
            }
        }
        transform_axis(&mut self.cache, &mut work, [n, n, 1], 0, RealTransform::Dct3);
        transform_axis(&mut self.cache, &mut work, [n, n, 1], 1, RealTransform::Dct3);
        let scale = 4.0 / (n * n) as f64;
        for v in work.iter_mut() {
            *v *= scale;
        }
        work
    }

    /// Componentwise (-mu_ref Delta_h)^{-1} with no-slip boundary handling.
    pub fn inv_laplacian(&mut self, r: &[Vec<f64>], mu_ref: f64) -> Vec<Vec<f64>> {
        let n = self.grid.n;
        (0..2)
            .map(|comp| {
                let (nx, ny) = comp_dims(n, comp);
                let mut work = r[comp].clone();
                let (kx, ky, ix, iy) = if comp == 0 {
                    (RealTransform::Dst1, RealTransform::Dst2, RealTransform::Dst1, RealTransform::Dst3)
                } else {
                    (RealTransform::Dst2, RealTransform::Dst1, RealTransform::Dst3, RealTransform::Dst1)
                };
                transform_axis(&mut self.cache, &mut work, [nx, ny, 1], 0, kx);
                transform_axis(&mut self.cache, &mut work, [nx, ny, 1], 1, ky);
                for j in 0..ny {
                    for i in 0..nx {
                        let lam = self.lam(i + 1) + self.lam(j + 1);
                        work[i + nx * j] /= mu_ref * lam;
                    }
                }
                transform_axis(&mut self.cache, &mut work, [nx, ny, 1], 0, ix);
                transform_axis(&mut self.cache, &mut work, [nx, ny, 1], 1, iy);
                // DST-I round trip scales by N/2 per axis, DST-II/III too
                let scale = 4.0 / (n * n) as f64;
                for v in work.iter_mut() {
                    *v *= scale;
                }
                work
            })
            .collect()
    }

    pub fn project(&mut self, u: &mut Vec<Vec<f64>>) {
        let n = self.grid.n;
        let d = divergence(n, self.grid.h, u);
        let q = self.poisson(&d);
        let g = gradient(n, self.grid.h, &q);
        axpy(u, -1.0, &g);
    }
}

/// Shared projected-PCG driver for the no-slip solves.
fn pcg_dirichlet<F: Fn(&[Vec<f64>]) -> Vec<Vec<f64>>>(
    grid: Grid,
    apply: F,
    mu_ref: f64,
    force: &[Vec<f64>],
    params: &SolverParams,
) -> Result<FlowState, StokesError> {
    params.validate()?;
    let n = grid.n;
    let mut spectral = DirichletSpectral::new(grid);
    let mut b = force.to_vec();
    let norm_f = dot(force, force).sqrt();
    spectral.project(&mut b);
    let norm_b = dot(&b, &b).sqrt();
    let mut u = zero_velocity(n);
    let mut iterations = 0;
    let mut res_mom = 0.0;
    // a conservative force projects to roundoff; the flow is exactly zero
    if norm_b > 1e-12 * norm_f.max(1.0) {
        let mut r = b.clone();
        let mut z = spectral.inv_laplacian(&r, mu_ref);
        spectral.project(&mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        loop {
            let mut ap = apply(&p);
            spectral.project(&mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            axpy(&mut u, alpha, &p);
            axpy(&mut r, -alpha, &ap);
            iterations += 1;
            res_mom = dot(&r, &r).sqrt() / norm_b;
            if res_mom <= params.tol_mom {
                break;
            }
            if iterations >= params.max_iter {
                let rd = divergence(n, grid.h, &u).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                return Err(StokesError::NoConvergence {
                    iterations,
                    residual_mom: res_mom,
                    residual_div: rd,
                });
            }
            z = spectral.inv_laplacian(&r, mu_ref);
            spectral.project(&mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..p.len() {
                for c in 0..p[i].len() {
                    p[i][c] = z[i][c] + beta * p[i][c];
                }
            }
        }
    }
    // pressure: Delta S = div(f - A u)
    let au = apply(&u);
    let mut resid = force.to_vec();
    axpy(&mut resid, -1.0, &au);
    let dv = divergence(n, grid.h, &resid);
    let pressure = spectral.poisson(&dv);
    let residual_div = divergence(n, grid.h, &u).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if residual_div > params.tol_div {
        return Err(StokesError::NoConvergence { iterations, residual_mom: res_mom, residual_div });
    }
    Ok(FlowState { grid, velocity: u, pressure, residual_mom: res_mom, residual_div, iterations })
}

fn anchor_fluid_mean(pressure: &mut [f64], chi: &[f64]) {
    let mut wsum = 0.0;
    let mut psum = 0.0;
    for (p, c) in pressure.iter().zip(chi) {
        let w = 1.0 - c;
        wsum += w;
        psum += w * p;
    }
    if wsum > 0.0 {
        let mean = psum / wsum;
        for p in pressure.iter_mut() {
            *p -= mean;
        }
    }
}

/// Sample a force function at the staggered face positions.
pub fn face_force<F: Fn([f64; 3]) -> [f64; 2]>(grid: &Grid, f: F) -> Vec<Vec<f64>> {
    let n = grid.n;
    let mut out = zero_velocity(n);
    for comp in 0..2 {
        let (nx, ny) = comp_dims(n, comp);
        for j in 0..ny {
            for i in 0..nx {
                out[comp][i + nx * j] = f(face_position(grid, comp, i, j))[comp];
            }
        }
    }
    out
}

/// Multiply a face force by the fluid fraction (1 - chi) averaged from the
/// two adjacent cells, restricting the load to the fluid region.
pub fn mask_force(grid: &Grid, force: &mut [Vec<f64>], chi: &[f64]) {
    let n = grid.n;
    for comp in 0..2 {
        let (nx, ny) = comp_dims(n, comp);
        for j in 0..ny {
            for i in 0..nx {
                let (ca, cb) = if comp == 0 {
                    (i + n * j, i + 1 + n * j)
                } else {
                    (i + n * j, i + n * (j + 1))
                };
                let fluid = 1.0 - 0.5 * (chi[ca] + chi[cb]);
                force[comp][i + nx * j] *= fluid;
            }
        }
    }
}

/// Heterogeneous no-slip solve with penalized particles.
pub fn solve_dirichlet(
    mu: &ViscosityField,
    force: &[Vec<f64>],
    rhs_fluid_only: bool,
    params: &SolverParams,
) -> Result<FlowState, StokesError> {
    let grid = mu.grid;
    if grid.kind != BoundaryKind::Dirichlet || grid.dim != 2 {
        return Err(StokesError::InvalidParameter(
            "no-slip solve requires a 2D Dirichlet grid".into(),
        ));
    }
    let ops = DirichletOps::new(mu);
    let mut f = force.to_vec();
    if rhs_fluid_only {
        mask_force(&grid, &mut f, &mu.chi);
    }
    let mut st = pcg_dirichlet(grid, |u| ops.apply(u), 1.0, &f, params)?;
    anchor_fluid_mean(&mut st.pressure, &mu.chi);
    Ok(st)
}

/// Homogenized solve: -div(2 B dev D(u)) + grad S = scale * f, with the
/// constant tensor B in strain-basis coordinates.
pub fn solve_homogenized(
    grid: Grid,
    b: [[f64; 2]; 2],
    force: &[Vec<f64>],
    scale: f64,
    params: &SolverParams,
) -> Result<FlowState, StokesError> {
    if grid.kind != BoundaryKind::Dirichlet || grid.dim != 2 {
        return Err(StokesError::InvalidParameter(
            "homogenized solve requires a 2D Dirichlet grid".into(),
        ));
    }
    let ops = AnisoOps::new(grid, b)?;
    let f: Vec<Vec<f64>> =
        force.iter().map(|c| c.iter().map(|v| scale * v).collect()).collect();
    let mut st = pcg_dirichlet(grid, |u| ops.apply(u), ops.mean_viscosity(), &f, params)?;
    // anchor over the whole domain (the homogenized medium has no particles)
    anchor_fluid_mean(&mut st.pressure, &vec![0.0; grid.cells()]);
    Ok(st)
}
