//! Certifying and recovering localization errors in anchor-free sensor
//! networks from inter-agent distance or bearing measurements.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: graphs, configurations and d-block vectors.
//! - [`measurement`]: the distance/bearing maps and sampling models.
//! - [`rigidity`]: rigidity matrices, analytic null spaces, rank reports.
//! - [`recoverability`]: how many errors are uniquely recoverable, and the
//!   constants of the noisy error bound.
//! - [`solver`]: block basis pursuit denoising and the sequential convex
//!   programming loop that recovers the error vector.
//! - [`oracle`]: exhaustive references for cross-checking.
//! - [`harness`]: scenarios, Monte Carlo sweeps and CSV output.

pub mod error;
pub mod harness;
pub mod measurement;
pub mod model;
pub mod oracle;
pub mod recoverability;
pub mod rigidity;
mod search;
pub mod solver;

pub use error::{Error, Result};
pub use measurement::{FaultMode, FaultOptions, MeasurementKind, MeasurementSet};
pub use model::{BlockVector, Configuration, ErrorState, SensorGraph};
