//! Flexibility characterization of building HVAC systems through virtual-battery
//! (VB) models.
//!
//! The crate builds exact VB models from discrete-time RC thermal networks,
//! aggregates zone-level models into a single building-level battery through the
//! dominant eigenpair of the scaled coupling matrix, fits a data-driven
//! energy-consumption surrogate, and runs a two-level demand-response pipeline
//! (LP commitment + zone-airflow tracking) against an RC-optimal cost oracle.

pub mod beta;
pub mod eigen;
pub mod error;
pub mod linalg;
pub mod policy;
pub mod scenario;
pub mod scheduler;
pub mod simplex;
pub mod surrogate;
pub mod thermal;
pub mod vb;

pub use error::{Error, Result};
pub use thermal::{ExogenousSeries, MultiZoneParams, SingleZoneParams, Trajectory};
pub use vb::{SocBoundTrajectory, SozConvention, VBAggregate, VBSingle};

/// Joules per kilowatt-hour; CSV artifacts report energy in kWh while the
/// internal unit system is SI (J, W, K, s).
pub const J_PER_KWH: f64 = 3.6e6;
