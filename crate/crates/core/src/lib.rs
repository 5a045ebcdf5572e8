//! Kernels for minimum-compliance design of single-layer fibre-reinforced
//! plates on structured quadrilateral grids.
//!
//! The optimisation runs in three stages:
//!
//! 1. [`dmo`]: discrete material optimisation over a set of candidate fibre
//!    angles, using a penalised weighted sum of rotated stiffness matrices.
//! 2. [`sbpto`]: sequential binary-phase topology optimisation, which sweeps
//!    over pairs of phases (candidate angles plus void) with element freezing
//!    until every element commits to a single phase.
//! 3. [`cfao`]: continuous fibre angle optimisation with a spatial angle
//!    filter, started from the discrete result.
//!
//! [`pipeline`] wires the stages together and [`benchmark`] holds the
//! standard MBB, L-bracket and cantilever problems.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line driver and timing live in the companion `dsco` crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod benchmark;
pub mod cfao;
pub mod config;
pub mod convergence;
pub mod dmo;
mod error;
pub mod fem;
pub mod filter;
pub mod linalg;
pub mod material;
pub mod mma;
pub mod oc;
pub mod pipeline;
pub mod problem;
pub mod sbpto;
#[cfg(test)]
mod testing;

pub use error::{Error, Result};
