//! Observation types shared by both recognition branches.

use nalgebra::{Isometry3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geom::Aabb;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationSource {
    Image,
    PointCloud,
    Fused,
}

/// One detected object instance, expressed in the world frame.
#[derive(Debug, Clone)]
pub struct ObjectObservation {
    pub source: ObservationSource,
    pub aabb_world: Aabb,
    pub centroid: Vector3<f64>,
    /// Flat pixel indices (row * width + col) for image-branch detections.
    pub mask_pixels: Option<Vec<u32>>,
    /// Indices into the originating scan for point-cloud detections.
    pub point_indices: Option<Vec<usize>>,
    pub label: String,
    /// Unit-norm multimodal descriptor.
    pub embedding: Vec<f64>,
    pub confidence: f64,
    /// Majority ground-truth body id; evaluation only, never used by the
    /// association cost.
    pub true_id: Option<u32>,
}

/// Mutual sensor calibration: sensor frames expressed in the robot base.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationSet {
    pub camera_to_base: Isometry3<f64>,
    pub lidar_to_base: Isometry3<f64>,
}

impl CalibrationSet {
    pub fn identity() -> Self {
        Self {
            camera_to_base: Isometry3::identity(),
            lidar_to_base: Isometry3::identity(),
        }
    }
}
