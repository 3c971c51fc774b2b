//! Spectral simulation of the renormalised dynamic Φ⁴ model on the torus
//! `[-1, 1]^d`, `d = 1, 2, 3`.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: torus geometry, fields, Fourier transforms and multipliers.
//! - [`besov`]: Littlewood–Paley blocks, Besov norms, paraproducts and
//!   commutators.
//! - [`noise`]: white noise, the Ornstein–Uhlenbeck field and seeded RNG
//!   streams.
//! - [`diagrams`]: the renormalised stochastic diagrams and their constants.
//! - [`solver`]: the direct, Da Prato–Debussche and paracontrolled time
//!   steppers.
//! - [`gronwall`]: singular Gronwall kernels and their series.
//! - [`harness`]: experiments with pass/fail verdicts.
//! - [`io`]: configuration, snapshots and CSV output.
//! - [`stats`]: medians, batch means and convergence orders.

// `!(x > 0.0)` is the NaN-rejecting form used for every argument check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod besov;
pub mod diagrams;
pub mod error;
pub mod grid;
pub mod gronwall;
pub mod harness;
pub mod io;
pub mod noise;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{make_grid, Field, TorusGrid};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/grids.md")]
    pub mod grids {}
    #[doc = include_str!("../../../book/src/besov.md")]
    pub mod besov {}
    #[doc = include_str!("../../../book/src/diagrams.md")]
    pub mod diagrams {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    pub mod solvers {}
    #[doc = include_str!("../../../book/src/gronwall.md")]
    pub mod gronwall {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
