//! Targetless extrinsic calibration for a camera-lidar-radar sensor trio.
//!
//! The crate solves for the three directed rigid transforms between the
//! sensors by minimizing pairwise feature-alignment losses together with a
//! global cyclic self-consistency loss, using Differential Evolution followed
//! by Nelder-Mead. A deterministic synthetic scene simulator with ground-truth
//! extrinsics provides the measurement data, the semantic oracle labels and a
//! controlled trihedral-corner evaluation harness.
//!
//! Module map:
//! - [`geometry`]: SE(3) transforms, Euler parameterization, pinhole camera.
//! - [`simworld`]: synthetic scenes, per-sensor rendering, dataset files.
//! - [`features`]: sampling, DBSCAN, RANSAC ground plane, radar tracking.
//! - [`losses`]: the three pairwise losses, the global loss, combined modes.
//! - [`optim`]: Differential Evolution, Nelder-Mead, pairwise/joint solves.
//! - [`pipeline`]: frame filtering, re-calibration triggers, orchestration.
//! - [`eval`]: corner-target error reports (pairwise + closed loop).

pub mod eval;
pub mod features;
pub mod geometry;
pub mod losses;
pub mod optim;
pub mod pipeline;
pub mod rng;
pub mod simworld;

mod book;

pub use geometry::{CalibrationState, CameraIntrinsics, EulerPose, RigidTransform};
