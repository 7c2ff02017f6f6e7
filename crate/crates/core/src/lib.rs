//! Simulation engine for the diffusion of residential heating technologies.
//!
//! Households in each region compare the generalised cost of heating of every
//! available technology pair; the resulting preference matrix drives an
//! inertial replicator-style share equation. On top of that sit premature
//! scrapping, learning-by-doing, policy schedules, energy and emission
//! accounting, and a calibration procedure for the intangible cost terms.

pub mod accounting;
pub mod calibration;
pub mod choice;
pub mod costs;
pub mod demand;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod scenario;
pub mod series;
pub mod synthetic;
pub mod tech;

pub use error::{Error, Result, Violation, ViolationKind};

/// Hours per average year; converts capacity (kW) into annual full-load energy (kWh).
pub const HOURS_PER_YEAR: f64 = 8766.0;

/// kJ per kWh.
pub const KJ_PER_KWH: f64 = 3600.0;
