//! Object segmentation and tracking: per-modality recognition, cross-modal
//! fusion, and Hungarian data association.

pub mod descriptor;
pub mod fuse;
pub mod hungarian;
pub mod observation;
pub mod segment_cloud;
pub mod segment_image;
pub mod tracker;

pub use descriptor::{encode_descriptor, label_block_cosine, DescriptorError, EMBEDDING_DIM};
pub use fuse::{fuse_observations, FusionParams};
pub use hungarian::{assignment_cost, solve_assignment, AssignmentError, CostMatrix, FORBIDDEN};
pub use observation::{CalibrationSet, ObjectObservation, ObservationSource};
pub use segment_cloud::{segment_point_cloud, CloudSegmenter, CloudSegmenterParams};
pub use segment_image::{segment_image_frame, ImageSegmentError, QueryGate, SegmentationMode};
pub use tracker::{
    track_objects, MatchReport, TrackError, TrackParams, TrackSet, TrackState, TrackedObject,
};
