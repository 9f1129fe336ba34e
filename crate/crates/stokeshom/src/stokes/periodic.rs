//! Periodic cell problem: -div(2 mu (D(psi) + E)) + grad Sigma = 0,
//! div psi = 0, psi periodic with zero mean.
//!
//! Discretization is the energy form
//! E[psi] = sum_cells 2 mu_c h^d sum_i (D_ii + E_ii)^2
//!        + sum_nodes 4 mu_n h^d sum_{i<j} (D_ij + E_ij)^2
//! with harmonic node viscosity, so the operator A = S^T W S is symmetric
//! positive semidefinite by construction. The solve runs conjugate gradients
//! on the divergence-free subspace: the Leray projection and the
//! constant-coefficient preconditioner (inverse component Laplacian) are both
//! exact via FFT. Velocity component i is stored cell-indexed, value [c]
//! sitting on the face between cells c and c + e_i.

use super::fft::{fft_nd, FftCache};
use super::grid::{FlowState, Grid, SolverParams, StokesError};
use super::visc::ViscosityField;
use crate::geom::KahanSum;

pub type Mat3 = [[f64; 3]; 3];

pub fn mat_frob2(m: &Mat3, dim: usize) -> f64 {
    let mut s = 0.0;
    for row in m.iter().take(dim) {
        for v in row.iter().take(dim) {
            s += v * v;
        }
    }
    s
}

pub fn check_strain(e: &Mat3, dim: usize) -> Result<(), StokesError> {
    let mut tr = 0.0;
    for i in 0..dim {
        tr += e[i][i];
        for j in 0..dim {
            if (e[i][j] - e[j][i]).abs() > 1e-12 {
                return Err(StokesError::IllPosed("imposed strain not symmetric".into()));
            }
        }
    }
    if tr.abs() > 1e-12 {
        return Err(StokesError::IllPosed("imposed strain not trace-free".into()));
    }
    Ok(())
}

fn pairs(dim: usize) -> &'static [(usize, usize)] {
    if dim == 2 {
        &[(0, 1)]
    } else {
        &[(0, 1), (0, 2), (1, 2)]
    }
}

/// Precomputed viscosity on cells and on the shear nodes of every i<j pair.
pub struct PeriodicOps {
    pub grid: Grid,
    mu_cell: Vec<f64>,
    /// Harmonic 4-cell average at the D_ij node, one field per pair.
    mu_node: Vec<Vec<f64>>,
}

impl PeriodicOps {
    pub fn new(mu: &ViscosityField) -> Self {
        let grid = mu.grid;
        let cells = grid.cells();
        let mu_cell: Vec<f64> = (0..cells).map(|c| mu.mu(c)).collect();
        let mu_node = pairs(grid.dim)
            .iter()
            .map(|&(i, j)| {
                let mut field = vec![0.0; cells];
                for c in grid.cells_iter() {
                    let c1 = grid.shift(c, i, 1);
                    let c2 = grid.shift(c, j, 1);
                    let c12 = grid.shift(c1, j, 1);
                    let inv: f64 = [c, c1, c2, c12]
                        .iter()
                        .map(|&cc| 1.0 / mu_cell[grid.idx(cc)])
                        .sum();
                    field[grid.idx(c)] = 4.0 / inv;
                }
                field
            })
            .collect();
        PeriodicOps { grid, mu_cell, mu_node }
    }

    pub fn zero_velocity(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.grid.cells()]; self.grid.dim]
    }

    /// D(u) + E: diagonal strains at cells (one per axis), shear strains at
    /// nodes (one per pair).
    pub fn strains(&self, u: &[Vec<f64>], e: &Mat3) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let g = &self.grid;
        let h = g.h;
        let cells = g.cells();
        let mut diag = vec![vec![0.0; cells]; g.dim];
        for c in g.cells_iter() {
            let idx = g.idx(c);
            for i in 0..g.dim {
                let cm = g.shift(c, i, -1);
                diag[i][idx] = (u[i][idx] - u[i][g.idx(cm)]) / h + e[i][i];
            }
        }
        let mut off = vec![vec![0.0; cells]; pairs(g.dim).len()];
        for (p, &(i, j)) in pairs(g.dim).iter().enumerate() {
            for c in g.cells_iter() {
                let idx = g.idx(c);
                let cj = g.idx(g.shift(c, j, 1));
                let ci = g.idx(g.shift(c, i, 1));
                off[p][idx] =
                    0.5 * ((u[i][cj] - u[i][idx]) / h + (u[j][ci] - u[j][idx]) / h) + e[i][j];
            }
        }
        (diag, off)
    }

    /// Transpose scatter of weighted strains into a face field:
    /// out_i[c] = (1/h)(sd_i[c] - sd_i[c+e_i] + sum_j (so_ij[c-e_j] - so_ij[c])),
    /// where sd, so are the diagonal/shear stress components 2 mu (D + E).
    fn scatter(&self, sd: &[Vec<f64>], so: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let g = &self.grid;
        let h = g.h;
        let mut out = self.zero_velocity();
        for c in g.cells_iter() {
            let idx = g.idx(c);
            for i in 0..g.dim {
                let cp = g.idx(g.shift(c, i, 1));
                out[i][idx] = (sd[i][idx] - sd[i][cp]) / h;
            }
        }
        for (p, &(i, j)) in pairs(g.dim).iter().enumerate() {
            for c in g.cells_iter() {
                let idx = g.idx(c);
                let cmj = g.idx(g.shift(c, j, -1));
                let cmi = g.idx(g.shift(c, i, -1));
                out[i][idx] += (so[p][cmj] - so[p][idx]) / h;
                out[j][idx] += (so[p][cmi] - so[p][idx]) / h;
            }
        }
        out
    }

    fn weighted(&self, diag: &[Vec<f64>], off: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let sd = diag
            .iter()
            .map(|f| f.iter().zip(&self.mu_cell).map(|(v, m)| 2.0 * m * v).collect())
            .collect();
        let so = off
            .iter()
            .zip(&self.mu_node)
            .map(|(f, mn)| f.iter().zip(mn).map(|(v, m)| 2.0 * m * v).collect())
            .collect();
        (sd, so)
    }

    /// A u = -div_h(2 mu D(u)).
    pub fn apply_a(&self, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let zero = [[0.0; 3]; 3];
        let (diag, off) = self.strains(u, &zero);
        let (sd, so) = self.weighted(&diag, &off);
        self.scatter(&sd, &so)
    }

    /// Right-hand side div_h(2 mu E) for the imposed strain E.
    pub fn rhs(&self, e: &Mat3) -> Vec<Vec<f64>> {
        let u = self.zero_velocity();
        let (diag, off) = self.strains(&u, e);
        let (sd, so) = self.weighted(&diag, &off);
        let mut out = self.scatter(&sd, &so);
        for comp in &mut out {
            for v in comp.iter_mut() {
                *v = -*v;
            }
        }
        out
    }

    pub fn div(&self, u: &[Vec<f64>]) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; g.cells()];
        for c in g.cells_iter() {
            let idx = g.idx(c);
            let mut s = 0.0;
            for i in 0..g.dim {
                s += (u[i][idx] - u[i][g.idx(g.shift(c, i, -1))]) / g.h;
            }
            out[idx] = s;
        }
        out
    }

    pub fn grad(&self, p: &[f64]) -> Vec<Vec<f64>> {
        let g = &self.grid;
        let mut out = self.zero_velocity();
        for c in g.cells_iter() {
            let idx = g.idx(c);
            for i in 0..g.dim {
                out[i][idx] = (p[g.idx(g.shift(c, i, 1))] - p[idx]) / g.h;
            }
        }
        out
    }

    /// Volume average of mu (D_a + E_a) : (D_b + E_b) for two states.
    pub fn energy_pair(&self, ua: &[Vec<f64>], ea: &Mat3, ub: &[Vec<f64>], eb: &Mat3) -> f64 {
        let (da, oa) = self.strains(ua, ea);
        let (db, ob) = self.strains(ub, eb);
        let cells = self.grid.cells() as f64;
        let mut acc = KahanSum::default();
        for c in 0..self.grid.cells() {
            let mut v = 0.0;
            for i in 0..self.grid.dim {
                v += da[i][c] * db[i][c];
            }
            acc.add(self.mu_cell[c] * v);
            let mut w = 0.0;
            for (p, _) in pairs(self.grid.dim).iter().enumerate() {
                w += 2.0 * self.mu_node[p][c] * oa[p][c] * ob[p][c];
            }
            acc.add(w);
        }
        acc.value() / cells
    }

    /// Volume average of the flux mu (D(u) + E), as a symmetric matrix.
    pub fn mean_flux(&self, u: &[Vec<f64>], e: &Mat3) -> Mat3 {
        let (diag, off) = self.strains(u, e);
        let cells = self.grid.cells() as f64;
        let mut out = [[0.0; 3]; 3];
        for i in 0..self.grid.dim {
            let mut acc = KahanSum::default();
            for c in 0..self.grid.cells() {
                acc.add(self.mu_cell[c] * diag[i][c]);
            }
            out[i][i] = acc.value() / cells;
        }
        for (p, &(i, j)) in pairs(self.grid.dim).iter().enumerate() {
            let mut acc = KahanSum::default();
            for c in 0..self.grid.cells() {
                acc.add(self.mu_node[p][c] * off[p][c]);
            }
            out[i][j] = acc.value() / cells;
            out[j][i] = out[i][j];
        }
        out
    }

    /// RMS of |D(u) + E| over the particle phase (chi-weighted).
    pub fn rigidity_rms(&self, u: &[Vec<f64>], e: &Mat3, chi: &[f64]) -> f64 {
        let (diag, off) = self.strains(u, e);
        let mut num = KahanSum::default();
        let mut den = KahanSum::default();
        for c in 0..self.grid.cells() {
            let mut v = 0.0;
            for i in 0..self.grid.dim {
                v += diag[i][c] * diag[i][c];
            }
            for (p, _) in pairs(self.grid.dim).iter().enumerate() {
                v += 2.0 * off[p][c] * off[p][c];
            }
            num.add(chi[c] * v);
            den.add(chi[c]);
        }
        if den.value() <= 0.0 {
            return 0.0;
        }
        (num.value() / den.value()).sqrt()
    }
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

/// FFT solves for the periodic grid: pressure Poisson, Leray projection, and
/// the component-Laplacian preconditioner.
pub struct PeriodicSpectral {
    grid: Grid,
    cache: FftCache,
    /// 4 sin^2(pi k / N) / h^2 per axis index.
    lam: Vec<f64>,
}

impl PeriodicSpectral {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n;
        let lam = (0..n)
            .map(|k| {
                let s = (std::f64::consts::PI * k as f64 / n as f64).sin();
                4.0 * s * s / (grid.h * grid.h)
            })
            .collect();
        PeriodicSpectral { grid, cache: FftCache::default(), lam }
    }

    fn eigen(&self, k: [usize; 3]) -> f64 {
        (0..self.grid.dim).map(|i| self.lam[k[i]]).sum()
    }

    /// Solve Delta_h q = rhs with zero mean (rhs must have zero mean).
    pub fn poisson(&mut self, rhs: &[f64]) -> Vec<f64> {
        let dims = self.grid.dims();
        let mut spec = fft_nd(&mut self.cache, rhs, dims, self.grid.dim);
        let n = self.grid.n;
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..n {
                    let lam = self.eigen([x, y, z]);
                    let id = x + n * (y + dims[1] * z);
                    if lam == 0.0 {
                        spec[id] = rustfft::num_complex::Complex::new(0.0, 0.0);
                    } else {
                        spec[id] = -spec[id] / lam;
                    }
                }
            }
        }
        super::fft::ifft_nd(&mut self.cache, &mut spec, dims, self.grid.dim)
    }

    /// Component-wise (-mu_ref Delta_h)^{-1}, zero mean per component.
    pub fn inv_laplacian(&mut self, r: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let dims = self.grid.dims();
        let n = self.grid.n;
        r.iter()
            .map(|comp| {
                let mut spec = fft_nd(&mut self.cache, comp, dims, self.grid.dim);
                for z in 0..dims[2] {
                    for y in 0..dims[1] {
                        for x in 0..n {
                            let lam = self.eigen([x, y, z]);
                            let id = x + n * (y + dims[1] * z);
                            if lam == 0.0 {
                                spec[id] = rustfft::num_complex::Complex::new(0.0, 0.0);
                            } else {
                                spec[id] /= lam;
                            }
                        }
                    }
                }
                super::fft::ifft_nd(&mut self.cache, &mut spec, dims, self.grid.dim)
            })
            .collect()
    }

    /// Leray projection u <- u - grad(Delta^{-1} div u); exact to FFT accuracy.
    pub fn project(&mut self, ops: &PeriodicOps, u: &mut Vec<Vec<f64>>) {
        let d = ops.div(u);
        let q = self.poisson(&d);
        let g = ops.grad(&q);
        axpy(u, -1.0, &g);
    }
}

/// Solve the periodic cell problem for imposed strain E.
pub fn solve_cell(
    mu: &ViscosityField,
    e: &Mat3,
    params: &SolverParams,
) -> Result<FlowState, StokesError> {
    params.validate()?;
    let grid = mu.grid;
    check_strain(e, grid.dim)?;
    let ops = PeriodicOps::new(mu);
    let mut spectral = PeriodicSpectral::new(grid);

    let mut b = ops.rhs(e);
    spectral.project(&ops, &mut b);
    let norm_b = dot(&b, &b).sqrt();
    let mut u = ops.zero_velocity();

    let mut iterations = 0;
    let mut res_mom = 0.0;
    if norm_b > 0.0 {
        let mut r = b.clone();
        let mut z = spectral.inv_laplacian(&r);
        spectral.project(&ops, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        loop {
            let mut ap = ops.apply_a(&p);
            spectral.project(&ops, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break; // p in the nullspace of the projected operator
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
                let rd = ops.div(&u).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                return Err(StokesError::NoConvergence {
                    iterations,
                    residual_mom: res_mom,
                    residual_div: rd,
                });
            }
            z = spectral.inv_laplacian(&r);
            spectral.project(&ops, &mut z);
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

    // pressure recovery: grad Sigma = b_raw - A u on the gradient component
    let b_raw = ops.rhs(e);
    let au = ops.apply_a(&u);
    let mut resid = b_raw;
    axpy(&mut resid, -1.0, &au);
    let dv = ops.div(&resid);
    let mut pressure = spectral.poisson(&dv);
    // anchor: zero mean over the fluid phase
    let w: Vec<f64> = mu.chi.iter().map(|c| 1.0 - c).collect();
    let wsum: f64 = w.iter().sum();
    if wsum > 0.0 {
        let mean = pressure.iter().zip(&w).map(|(p, w)| p * w).sum::<f64>() / wsum;
        for p in pressure.iter_mut() {
            *p -= mean;
        }
    }

    let residual_div = ops.div(&u).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if residual_div > params.tol_div {
        return Err(StokesError::NoConvergence {
            iterations,
            residual_mom: res_mom,
            residual_div,
        });
    }
    Ok(FlowState {
        grid,
        velocity: u,
        pressure,
        residual_mom: res_mom,
        residual_div,
        iterations,
    })
}

/// Multilinear periodic interpolation on a lattice with per-axis offsets (in
/// units of h): 0.5 for cell-centered axes, 1.0 for face/node-aligned axes.
pub fn interp_periodic(grid: &Grid, field: &[f64], off: [f64; 3], x: [f64; 3]) -> f64 {
    let n = grid.n as isize;
    let mut base = [0isize; 3];
    let mut frac = [0.0; 3];
    for i in 0..grid.dim {
        let t = x[i] / grid.h - off[i];
        let f = t.floor();
        base[i] = f as isize;
        frac[i] = t - f;
    }
    let mut acc = 0.0;
    let corners = 1usize << grid.dim;
    for corner in 0..corners {
        let mut w = 1.0;
        let mut c = [0usize; 3];
        for i in 0..grid.dim {
            let bit = (corner >> i) & 1;
            w *= if bit == 1 { frac[i] } else { 1.0 - frac[i] };
            c[i] = (base[i] + bit as isize).rem_euclid(n) as usize;
        }
        acc += w * field[grid.idx(c)];
    }
    acc
}

/// Total strain D(u) + E interpolated at a point (symmetric d x d matrix).
pub fn sample_total_strain(ops: &PeriodicOps, u: &[Vec<f64>], e: &Mat3, x: [f64; 3]) -> Mat3 {
    let g = &ops.grid;
    let (diag, off) = ops.strains(u, e);
    let mut out = [[0.0; 3]; 3];
    let centered = [0.5, 0.5, 0.5];
    for i in 0..g.dim {
        out[i][i] = interp_periodic(g, &diag[i], centered, x);
    }
    for (p, &(i, j)) in pairs(g.dim).iter().enumerate() {
        let mut offsets = [0.5, 0.5, 0.5];
        offsets[i] = 1.0;
        offsets[j] = 1.0;
        let v = interp_periodic(g, &off[p], offsets, x);
        out[i][j] = v;
        out[j][i] = v;
    }
    out
}
