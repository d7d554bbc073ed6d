//! PID interest rate model for lending markets, the Aave / Ajna / Morpho
//! style baselines it is compared against, and a deterministic simulation
//! engine with golden-trace replay and grid-search calibration.
//!
//! All production arithmetic runs on [`Decimal`], an 18-digit fixed-point
//! type. Every model is generic over [`Scalar`] so it can also run on the
//! 50-digit [`Reference`] backend for differential checks.

pub mod baselines;
pub mod calibrate;
pub mod config;
pub mod engine;
mod error;
pub mod numerics;
pub mod pid;
pub mod scenario;
pub mod strategy;

pub use error::IrmError;
pub use numerics::{Backend, Decimal, NumericError, Reference, Scalar};
pub use pid::{ControllerBreakdown, PidConfig, PidController, PidState};
pub use scenario::{FeedbackModel, Sample, ScenarioSpec, Segment};
pub use strategy::{IrmKind, Strategy};
