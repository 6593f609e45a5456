//! Tracker interface and reference trackers.
//!
//! Trackers consume [`ObservedFrame`]s — a view of the data with the ground
//! truth stripped — and maintain a current pose estimate. The harness owns
//! initialization and resets.

mod icp;
mod kdtree;

use thiserror::Error;

use crate::dataset::ObservedFrame;
use crate::mesh::Mesh;
use crate::se3::Pose;

pub use icp::{IcpConfig, IcpTracker};
pub use kdtree::KdTree3;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("tracker was not initialized")]
    NotInitialized,
}

/// Outcome of one tracking step.
#[derive(Debug, Clone, Copy)]
pub struct UpdateReport {
    pub pose: Pose,
    /// Set when too little of the observation overlapped the model; the
    /// tracker kept its previous pose. Non-fatal: the harness failure rule
    /// decides what to do with it.
    pub low_overlap: bool,
    pub iterations: usize,
    pub mean_residual_mm: f64,
}

pub trait Tracker: Send {
    fn name(&self) -> &'static str;

    /// Binds the tracker to an object model and sets the starting pose.
    fn init(&mut self, mesh: &Mesh, pose0: Pose) -> Result<(), TrackError>;

    /// Processes one observation and returns the new pose estimate.
    fn update(&mut self, frame: &ObservedFrame) -> UpdateReport;

    /// Overwrites the current pose (ground-truth reset).
    fn reset(&mut self, pose: Pose);

    fn current_pose(&self) -> Pose;
}

/// Returns the initialization pose forever; the drift baseline.
#[derive(Debug)]
pub struct FrozenTracker {
    pose: Pose,
}

impl FrozenTracker {
    pub fn new() -> Self {
        FrozenTracker {
            pose: Pose::identity(),
        }
    }
}

impl Default for FrozenTracker {
    fn default() -> Self {
        Self::new()
    }
}

impl Tracker for FrozenTracker {
    fn name(&self) -> &'static str {
        "frozen"
    }

    fn init(&mut self, mesh: &Mesh, pose0: Pose) -> Result<(), TrackError> {
        if mesh.triangles.is_empty() {
            return Err(TrackError::EmptyMesh);
        }
        self.pose = pose0;
        Ok(())
    }

    fn update(&mut self, _frame: &ObservedFrame) -> UpdateReport {
        UpdateReport {
            pose: self.pose,
            low_overlap: false,
            iterations: 0,
            mean_residual_mm: 0.0,
        }
    }

    fn reset(&mut self, pose: Pose) {
        self.pose = pose;
    }

    fn current_pose(&self) -> Pose {
        self.pose
    }
}

/// Constructs a tracker by CLI name. `echo` is not constructible here: it is
/// the harness-side oracle that replays ground truth.
pub fn by_name(name: &str) -> Option<Box<dyn Tracker>> {
    match name {
        "icp" => Some(Box::new(IcpTracker::new(IcpConfig::default()))),
        "frozen" => Some(Box::new(FrozenTracker::new())),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn frozen_keeps_init_pose() {
        let mut t = FrozenTracker::new();
        let mesh = Mesh::cuboid(10.0, 10.0, 10.0);
        let pose = Pose::from_translation(1.0, 2.0, 3.0);
        t.init(&mesh, pose).unwrap();
        assert_eq!(t.current_pose(), pose);
        t.reset(Pose::identity());
        assert_eq!(t.current_pose(), Pose::identity());
    }

    #[test]
    fn empty_mesh_rejected() {
        let mut t = FrozenTracker::new();
        let bad = Mesh {
            vertices: vec![Vector3::zeros()],
            triangles: vec![],
            colors: None,
        };
        assert!(matches!(t.init(&bad, Pose::identity()), Err(TrackError::EmptyMesh)));
    }

    #[test]
    fn by_name_resolves() {
        assert!(by_name("icp").is_some());
        assert!(by_name("frozen").is_some());
        assert!(by_name("echo").is_none());
        assert!(by_name("nope").is_none());
    }
}
