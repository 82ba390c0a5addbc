//! Charge-informed decoding of U(1)-conserving errors on the periodic square
//! lattice.
//!
//! Integer link errors `k` are drawn from a discrete Gaussian, their lattice
//! divergence is the measured syndrome, and decoding asks which winding
//! sector of the closed loops `J = k' - k` is most likely. The crate provides
//!
//! * [`lattice`]: torus geometry, link fields, divergence and winding;
//! * [`noise`]: the discrete Gaussian error model and its closed forms;
//! * [`worm`]: worm-algorithm sampling of the disordered loop model;
//! * [`observables`]: helicity moduli, correlators, disorder averages;
//! * [`mcf`]: a min-cost-flow solver and the resulting decoder;
//! * [`decoders`]: optimal and MCF decoders, sweeps over error strength;
//! * [`scaling`]: Weber–Minnhagen fits and finite-size scaling collapses.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decoders;
pub mod error;
pub mod lattice;
pub mod mcf;
pub mod noise;
pub mod observables;
pub mod oracle;
pub mod scaling;
mod sector_map;
pub mod seeds;
pub mod worm;

pub use error::{Error, Result};
pub use lattice::{Axis, Direction, LinkField, Syndrome, TorusLattice, Winding};
