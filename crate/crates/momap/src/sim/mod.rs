//! Deterministic synthetic dynamic-world generator: analytic primitives,
//! scripted motion, and every sensor stream the pipeline consumes.

pub mod log;
pub mod render;
pub mod scenario;
pub mod world;

pub use log::{load_log, run_simulation, simulate, GroundTruth, LogError, TruthFrame};
pub use render::{cast_ray, lidar_directions, pixel_ray, render_frame, LidarPoint, SensorFrame};
pub use scenario::{
    load_scenario, load_scenario_str, CameraConfig, GnssConfig, ImuConfig, LidarConfig, Motion,
    NoiseConfig, RigidBody, ScenarioError, ScenarioSpec, Shape, Waypoint,
};
pub use world::{body_pose_at, sample_path, sample_path_velocity, step_world, world_at, WorldState};
