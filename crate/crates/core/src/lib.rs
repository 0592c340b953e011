//! A desk-scale laboratory for the inviscid limit of the compressible
//! Navier-Stokes system in a periodic channel.
//!
//! The crate is organised bottom-up:
//!
//! * [`thermo`]: pressure law, entropy `H`, relative entropy and its sandwich bounds.
//! * [`tensor`]: the viscous stress tensor and its coercivity.
//! * [`domain`]: the graded channel mesh, distance to the walls, boundary strips, norms.
//! * [`reference`]: exact steady shear solutions of the Euler system.
//! * [`solver`]: explicit MUSCL/Rusanov finite-volume integrator with no-slip or Navier walls.
//! * [`layer`]: the cut-off corrector that makes the Euler velocity vanish on the walls.
//! * [`diagnostics`]: relative energies, the boundary-strip dissipation functional,
//!   remainder terms and the relative-energy inequality ledger.
//! * [`harness`]: configuration, viscosity sweeps, order fitting and reports.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments
)]

pub mod diagnostics;
pub mod domain;
pub mod exec;
pub mod harness;
pub mod layer;
pub mod reference;
pub mod solver;
pub mod tensor;
pub mod thermo;

mod error;

pub use error::{Error, Result};
