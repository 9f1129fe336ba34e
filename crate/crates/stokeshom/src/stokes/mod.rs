//! Variable-viscosity incompressible Stokes solves on a marker-and-cell
//! staggered grid, periodic or no-slip, with rigid particles approximated by
//! a large penalization viscosity.

pub mod dirichlet;
pub mod fft;
pub mod grid;
pub mod periodic;
pub mod visc;

pub use fft::FftCache;
pub use grid::{BoundaryKind, FlowState, Grid, SolverParams, StokesError};
pub use visc::{rasterize, ViscosityField};
