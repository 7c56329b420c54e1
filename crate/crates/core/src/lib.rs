//! Video stabilization toolkit trained on synthetic data.
//!
//! The pipeline estimates a 4-DOF similarity between consecutive frames
//! ([`motion`]), accumulates and smooths the camera trajectory
//! ([`trajectory`]), then warps and crops every frame ([`stabilizer`]).
//! [`synth`] produces shaky videos with exact mark-point ground truth and
//! [`metrics`] scores the result.

pub mod affine;
pub mod cli;
pub mod error;
pub mod frame;
pub mod io_util;
pub mod metrics;
pub mod motion;
pub mod stabilizer;
pub mod synth;
pub mod trajectory;

pub use affine::{AffineMatrix, AffineParams, Correspondence};
pub use error::{Error, Result};
pub use frame::Frame;
