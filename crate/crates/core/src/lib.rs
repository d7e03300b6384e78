//! Reactive vessel traffic simulation following the COLREGS encounter rules.

pub mod compliance;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod mpc;
pub mod predicates;
pub mod simulator;
pub mod waypoint;

pub use error::{Error, Result};
