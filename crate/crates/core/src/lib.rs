//! Numerical laboratory for observability and control of the one-dimensional
//! Schrödinger equation `i u_t - u_xx + V u = 0` on thick control sets.
//!
//! Everything is discretized on a Dirichlet box with a three-point stencil and
//! worked out in the eigenbasis of the resulting Hamiltonian:
//!
//! * [`domain`]: grids, gauge-normalized potentials and thick sets.
//! * [`operator`]: the Hamiltonian, its spectrum and functional calculus.
//! * [`observability`]: Gramians and sharp observability constants.
//! * [`fit`]: least-squares fits of constants against cost laws.
//! * [`control`]: HUM control synthesis and an independent time stepper.
//! * [`fbi`]: the Gaussian FBI transform in time and its intertwining identity.
//! * [`verify`]: standalone checks of the auxiliary inequalities.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod domain;
pub mod error;
pub mod fbi;
pub mod fit;
pub mod linalg;
pub mod observability;
pub mod operator;
pub mod verify;

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use domain::{
    check_thick, gauge_shift, gen_periodic_thickset, gen_random_thickset, make_grid, mask, random_potential_samples,
    Grid, Mask, Potential, ThickSet,
};
pub use error::{LabError, Result};
pub use operator::{HamiltonianSpectrum, StateVector};
