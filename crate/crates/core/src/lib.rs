//! Numerical laboratory for integrated super-Brownian excursion and the
//! lattice models whose scaling limit it is.
//!
//! Modules, roughly bottom-up:
//!
//! - [`shapes`]: labelled binary tree skeletons indexing m-point functions.
//! - [`ise`]: ISE densities and Fourier transforms by deterministic quadrature.
//! - [`genfun`]: exact generating-function coefficients, contour inversion
//!   and ratio checks of their asymptotics.
//! - [`lattice`]: lattice models and exhaustive lattice-tree enumeration.
//! - [`trees`]: backbones of marked trees, m-point counts and the s = u + e
//!   decomposition.
//! - [`brw`]: branching random walk conditioned on total size.
//! - [`percolation`]: exact and Monte Carlo critical-cluster statistics.
//! - [`cli`]: the `iselab` command-line front end.
//!
//! Support: [`qsqrt2`] (exact arithmetic in Q(√2)), [`quadrature`],
//! [`stats`] (seeded streams and bootstrap errors) and [`error`].

pub mod brw;
pub mod cli;
pub mod error;
pub mod genfun;
pub mod ise;
pub mod lattice;
pub mod percolation;
pub mod qsqrt2;
pub mod quadrature;
pub mod shapes;
pub mod stats;
pub mod trees;

pub use error::{Error, Result};
