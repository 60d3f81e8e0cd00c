//! RSSI-based indoor localization toolkit.
//!
//! The crate covers the whole pipeline from radio modeling to evaluation:
//!
//! - [`model`]: shared domain types (positions, anchors, scenes, measurements).
//! - [`radio`]: log-distance path loss with log-normal shadowing, plus a
//!   seeded synthetic measurement generator.
//! - [`filters`]: moving-average, median, Gaussian and scalar Kalman smoothing
//!   of RSSI streams.
//! - [`solvers`]: closed-form position estimators (trilateration, pseudo-linear
//!   LS/WLS, bias-compensated WLS, weighted hyperbolic).
//! - [`learners`]: linear/polynomial regression, CART trees, forests, kNN and a
//!   small feed-forward network.
//! - [`ensemble`]: the TreeLoc stacking ensemble.
//! - [`eval`]: regression and classification metrics.
//! - [`ingest`]: CSV readers/writers for the testbed and iBeacon formats.
//!
//! Lengths are in centimeters throughout unless a function says otherwise.

pub mod ensemble;
pub mod error;
pub mod eval;
pub mod filters;
pub mod ingest;
pub mod learners;
mod linalg;
pub mod model;
pub mod radio;
pub mod rng;
pub mod solvers;

pub use error::{Error, ErrorClass, Result};
pub use model::{position_error, validate_scene, Anchor, MeasurementSet, PathLossParams, Position, Scene};
