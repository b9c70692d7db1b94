//! Object-aware multimodal 3D mapping over synthetic dynamic scenes.
//!
//! The crate is organized as a pipeline of modules that mirror a mobile
//! robot's perception stack, plus a statistical verifier for the fusion
//! claims the stack rests on:
//!
//! - [`sim`] — deterministic synthetic world generator: boxes and spheres
//!   with scripted motion, a pinhole depth camera, a spinning lidar, and
//!   noisy GNSS/IMU channels.
//! - [`perception`] — per-modality object segmentation, deterministic
//!   multimodal descriptors, cross-modal fusion, and Hungarian tracking.
//! - [`odometry`] — ICP scan matching with dynamic-point removal, fused
//!   with GNSS and IMU by an unscented Kalman filter.
//! - [`mapping`] — accumulated multimodal map (log-odds voxel grid +
//!   scene graph + place database) and immutable keyframe snapshots.
//! - [`retrieval`] — encoder-based object/place search and one-stage vs
//!   two-stage relational grounding over the scene graph.
//! - [`theory`] — Monte Carlo verifier for the linear and attention-like
//!   fusion-quality conditions, including witness search and replay.
//! - [`harness`] — end-to-end pipeline orchestration, evaluation metrics,
//!   benchmark generators, and the CLI surface.
//!
//! Every component is deterministic for a fixed seed; see the `examples/`
//! directory for one runnable walkthrough per capability.

pub mod geom;
pub mod harness;
pub mod mapping;
pub mod odometry;
pub mod perception;
pub mod retrieval;
pub mod rng;
pub mod sim;
pub mod theory;
