//! Tracer particles exchanging energy with hot scatterers.
//!
//! Four models share one state space: the basic renewal process in a box,
//! the general model driven by an arbitrary transition matrix, wandering
//! tracers that cross the whole array, and confined tracers locked in a cell.
//! The crate offers an exact event-driven simulator together with the closed
//! forms it is checked against: invariant measures, stationary currents,
//! collision frequencies, the cumulant generating function of the current and
//! self-consistent temperature profiles.

pub mod analytic;
pub mod cgf;
pub mod error;
pub mod model;
pub mod numeric;
pub mod sampling;
pub mod selfconsistent;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
