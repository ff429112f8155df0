//! Simulation and policy library for online resource allocation when
//! customer arrivals are non-stationary and purchase probabilities must be
//! learned online.
//!
//! - [`model`]: instances, schedules, the logistic purchase model and the
//!   inventory-balancing penalty.
//! - [`lp`]: dense simplex, a vertex-enumeration oracle, and the allocation
//!   and benchmark LPs.
//! - [`policy`]: the LP protocol, the inventory-balancing protocol, and the
//!   unified switching policy.
//! - [`sim`]: episodes, replications, regret traces and experiment presets.

pub mod error;
pub mod lp;
pub mod model;
pub mod policy;
pub mod sim;
pub mod theta;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
