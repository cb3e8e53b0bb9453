//! Perception and control stack for a rounded optical-tactile fingertip.
//!
//! The crate is organized around the data flow of the sensor:
//!
//! * [`surface`] — analytic fingertip geometry (capped cylinder), quad
//!   tessellation and surface grids.
//! * [`sim`] — synthetic sensor: pinhole camera, directional-illumination
//!   shading and probe/object indentation models. Stands in for the
//!   physical hardware and provides ground truth for tests.
//! * [`calib`] — pokes the simulated sensor on a schedule, detects contacts
//!   with a circle Hough transform and builds the calibration bundle
//!   (per-quad homographies, reference point cloud, RGB-to-gradient tables).
//! * [`recon`] — frame to point cloud: difference image, gradient lookup,
//!   DST Poisson integration, per-quad perspective warp, cloud update.
//! * [`contact`] — contact patch extraction and hull-gated ICP tracking.
//! * [`control`] — hybrid velocity/force rolling controller and the
//!   quasi-static two-finger rolling experiment.
//! * [`testkit`] — brute-force oracles used by validation tests. Kept
//!   independent of the optimized implementations they check.

pub mod calib;
pub mod config;
pub mod contact;
pub mod control;
pub mod error;
pub mod io;
pub mod recon;
pub mod sim;
pub mod surface;
pub mod testkit;
pub mod util;

pub use error::{Error, Result};
