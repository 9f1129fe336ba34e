//! Numerical toolkit for the effective viscosity of rigid-particle
//! suspensions in steady Stokes flow.
//!
//! The crate is organized around the pipeline
//! generate -> analyze gaps -> solve cell problems -> assemble effective
//! tensors -> homogenization experiments:
//!
//! - [`ensemble`]: hardcore particle configurations, interparticle gap
//!   geometry, and inverse-gap moment statistics.
//! - [`cutoff`]: the explicit parabolic cut-off field between two close
//!   paraboloids, with closed-form derivatives and its L^r scaling laws.
//! - [`stokes`]: variable-viscosity incompressible Stokes solves on a
//!   staggered grid (periodic cell problems and Dirichlet domain problems),
//!   with rigid particles approximated by a large penalization viscosity.
//! - [`effective`]: assembly of the effective viscosity tensor and the
//!   effective pressure constant from cell solutions, with independent
//!   estimators, kappa-extrapolation, and Monte Carlo over seeds.
//! - [`homogenize`]: eps-scaling experiments measuring two-scale expansion
//!   errors against the homogenized problem.
//! - [`report`]: file formats (CSV, JSON sidecars, flat binary fields).

pub mod cutoff;
pub mod effective;
pub mod ensemble;
pub mod geom;
pub mod homogenize;
pub mod report;
pub mod stokes;
