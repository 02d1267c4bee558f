//! Numerical laboratory for conformal metrics `e^{u(z)}|dz|` with an
//! isolated conical singularity at the origin, where `u` solves the
//! curvature equation `Δu = k(z) e^{2u}` with `k ≤ 0` bounded.
//!
//! The crate is split into:
//! - [`geometry`]: log-polar grids, sampled fields, metric descriptors;
//! - [`diffops`]: Wirtinger derivatives, Laplacian, connection, Schwarzian
//!   and the pullback under `z ↦ z^m`;
//! - [`potentials`]: disk Green's function, Newton and Green potentials;
//! - [`solver`]: Newton iteration for the curvature equation on an annulus;
//! - [`asymptotics`]: conical-order fitting, energy, decomposition checks,
//!   limit extrapolation and Laurent analysis;
//! - [`cli`]: the command-line front end.

pub mod asymptotics;
pub mod cli;
pub mod diffops;
pub mod error;
pub mod geometry;
pub mod potentials;
pub mod solver;

pub(crate) mod quadrature;
pub(crate) mod spectral;

pub use error::{Error, Result};
