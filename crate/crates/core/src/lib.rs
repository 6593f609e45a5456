//! 6-DOF object tracking evaluation toolkit.
//!
//! Pose metrics and SE(3) algebra, the ground-truth calibration pipeline
//! (rig chaining, probe sphere fit, PnP, temporal sync), a software depth
//! rasterizer, depth marker inpainting, training-pair perturbation sampling,
//! the scenario evaluation harness, a point-to-plane ICP baseline tracker,
//! and a synthetic sequence generator that ties them together.

pub mod calib;
pub mod camera;
pub mod dataset;
pub mod depth;
pub mod harness;
pub mod mesh;
pub mod render;
pub mod repair;
pub mod rng;
pub mod sampler;
pub mod se3;
pub mod synth;
pub mod tracking;

pub use camera::Intrinsics;
pub use dataset::{Frame, ObservedFrame, Sequence};
pub use depth::{DepthImage, Mask};
pub use harness::{EvalConfig, EvalReport, ScenarioKind, TrackerDriver};
pub use mesh::Mesh;
pub use se3::{compose, delta_r, delta_t, invert, EulerAngles, Pose, Rotation};
