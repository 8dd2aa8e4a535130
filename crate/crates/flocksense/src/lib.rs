//! Deterministic agent-based simulation of a self-organizing flock monitored
//! by a randomly deployed proximity-sensor network.
//!
//! The model's structural rules (heading and position ranges, sensor count
//! bounds, id uniqueness, sensor immobility) are enforced as runtime
//! invariants every tick rather than assumed, and flocking emergence is
//! measured with explicit indices instead of eyeballing rendered frames.
//!
//! Module map:
//!
//! * [`model`]: shared domain types plus angular/geometric primitives.
//! * [`flocking`]: the per-boid behavior rules and forward motion.
//! * [`sensing`]: sensor deployment and per-tick detection counting.
//! * [`engine`]: seeded init, the synchronous tick loop, invariant checks.
//! * [`metrics`]: polarization, vision-graph components, detection totals.
//! * [`config`], [`trace`], [`plot`], [`cli`]: scenario files, trace
//!   serialization, SVG plots, and the command-line surface.

pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod flocking;
pub mod metrics;
pub mod model;
pub mod plot;
pub mod sensing;
pub mod trace;

pub use error::{Error, Result};
