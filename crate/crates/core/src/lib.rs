//! Simulation and analysis core for consensus-based formation control over a
//! wireless multiple-access channel.
//!
//! Agents broadcast displacement-shifted positions simultaneously; each
//! receiver normalizes the superimposed signal into a convex combination of
//! its neighbours' values (the row-stochastic matrix `H_k`), updates its held
//! reference and tracks it in continuous time until the next communication
//! instant. The crate provides the channel model, the agent models, the
//! jump-flow engine and the convergence conditions used to check simulated
//! runs.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, configuration
//! parsing and the command line live in the `otaform` companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod agents;
pub mod analysis;
pub mod error;
pub mod formation;
pub mod math;
pub mod planar;
pub mod rng;
pub mod sim;
pub mod stochastic;
pub mod topology;
pub mod verify;

pub use error::{Error, Result};
pub use planar::Vec2;
