//! Scenario schema: the JSON file that fully determines a synthetic run.
//!
//! Unknown keys are rejected so a typo in a config cannot silently fall
//! back to a default.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{Isometry3, UnitQuaternion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::PoseDto;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate body id {0}")]
    DuplicateBodyId(u32),
    #[error("{field} must be positive (got {value})")]
    NonPositive { field: &'static str, value: f64 },
    #[error("camera dimensions must be at least 1x1")]
    DegenerateCamera,
    #[error("waypoint times must be strictly increasing (body {context})")]
    NonIncreasingWaypoints { context: String },
    #[error("robot_path must contain at least one waypoint")]
    EmptyRobotPath,
    #[error("body {0}: {1} must be positive")]
    BadShape(u32, &'static str),
}

/// One timed waypoint of a path.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t: f64,
    pub p: [f64; 3],
    #[serde(default = "default_quat")]
    pub q: [f64; 4],
}

fn default_quat() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

impl Waypoint {
    pub fn pose(&self) -> Isometry3<f64> {
        let dto = PoseDto { p: self.p, q: self.q };
        (&dto).into()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Box { half_extents: [f64; 3] },
    Sphere { radius: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum Motion {
    Static,
    ConstantVelocity { v: [f64; 3] },
    WaypointLoop { waypoints: Vec<Waypoint> },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RigidBody {
    pub id: u32,
    pub shape: Shape,
    #[serde(default = "default_color")]
    pub color: [f64; 3],
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default)]
    pub pose: Option<PoseDto>,
    #[serde(default = "default_motion")]
    pub motion: Motion,
    #[serde(default)]
    pub interactive_state: Option<bool>,
    /// Body exists only within `[t_on, t_off)`; `None` means always.
    #[serde(default)]
    pub lifetime: Option<[f64; 2]>,
}

fn default_color() -> [f64; 3] {
    [0.5, 0.5, 0.5]
}

fn default_label() -> String {
    "object".to_string()
}

fn default_motion() -> Motion {
    Motion::Static
}

impl RigidBody {
    pub fn initial_pose(&self) -> Isometry3<f64> {
        match &self.motion {
            Motion::WaypointLoop { waypoints } if !waypoints.is_empty() => waypoints[0].pose(),
            _ => self
                .pose
                .as_ref()
                .map(Isometry3::from)
                .unwrap_or_else(Isometry3::identity),
        }
    }

    pub fn alive_at(&self, t: f64) -> bool {
        match self.lifetime {
            Some([on, off]) => t >= on && t < off,
            None => true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    #[serde(default = "default_fx")]
    pub fx: f64,
    #[serde(default = "default_fx")]
    pub fy: f64,
    #[serde(default = "default_cx")]
    pub cx: f64,
    #[serde(default = "default_cy")]
    pub cy: f64,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    /// Camera frame in robot base coordinates. Camera looks along +z of
    /// its own frame; the default aims it along the robot's +x axis.
    #[serde(default = "default_camera_extrinsic")]
    pub extrinsic: PoseDto,
}

fn default_fx() -> f64 {
    48.0
}
fn default_cx() -> f64 {
    32.0
}
fn default_cy() -> f64 {
    24.0
}
fn default_width() -> u32 {
    64
}
fn default_height() -> u32 {
    48
}

fn default_camera_extrinsic() -> PoseDto {
    // Columns: camera x (right) = -y_base, camera y (down) = -z_base,
    // camera z (forward) = +x_base.
    let rot = nalgebra::Rotation3::from_matrix_unchecked(nalgebra::Matrix3::new(
        0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, //
        0.0, -1.0, 0.0,
    ));
    let q = UnitQuaternion::from_rotation_matrix(&rot);
    let iso = Isometry3::from_parts(nalgebra::Translation3::new(0.0, 0.0, 0.0), q);
    (&iso).into()
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            fx: default_fx(),
            fy: default_fx(),
            cx: default_cx(),
            cy: default_cy(),
            width: default_width(),
            height: default_height(),
            extrinsic: default_camera_extrinsic(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LidarConfig {
    #[serde(default = "default_azimuth_count")]
    pub azimuth_count: u32,
    #[serde(default = "default_elevation_rings")]
    pub elevation_rings: u32,
    #[serde(default = "default_max_range")]
    pub max_range: f64,
    #[serde(default = "default_elev_min")]
    pub elevation_min_deg: f64,
    #[serde(default = "default_elev_max")]
    pub elevation_max_deg: f64,
    #[serde(default = "PoseDto::identity")]
    pub extrinsic: PoseDto,
}

fn default_azimuth_count() -> u32 {
    360
}
fn default_elevation_rings() -> u32 {
    16
}
fn default_max_range() -> f64 {
    50.0
}
fn default_elev_min() -> f64 {
    -15.0
}
fn default_elev_max() -> f64 {
    15.0
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            azimuth_count: default_azimuth_count(),
            elevation_rings: default_elevation_rings(),
            max_range: default_max_range(),
            elevation_min_deg: default_elev_min(),
            elevation_max_deg: default_elev_max(),
            extrinsic: PoseDto::identity(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct GnssConfig {
    #[serde(default)]
    pub sigma_pos: f64,
    #[serde(default)]
    pub sigma_rot: f64,
    /// `[t_on, t_off)` intervals during which fixes arrive. `None` = always.
    #[serde(default)]
    pub availability: Option<Vec<[f64; 2]>>,
}

impl GnssConfig {
    pub fn available_at(&self, t: f64) -> bool {
        match &self.availability {
            None => true,
            Some(intervals) => intervals.iter().any(|w| t >= w[0] && t < w[1]),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct ImuConfig {
    #[serde(default)]
    pub sigma_vel: f64,
    #[serde(default)]
    pub sigma_acc: f64,
    /// IMU channels are emitted only when enabled.
    #[serde(default = "default_true")]
    pub enabled: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Gaussian sigma on every lidar return, meters along the beam.
    #[serde(default)]
    pub lidar_sigma_range: f64,
}

/// A complete, validated synthetic-run description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
    #[serde(default)]
    pub bodies: Vec<RigidBody>,
    #[serde(default = "default_robot_path")]
    pub robot_path: Vec<Waypoint>,
    #[serde(default)]
    pub camera: CameraConfig,
    #[serde(default)]
    pub lidar: LidarConfig,
    #[serde(default)]
    pub gnss: GnssConfig,
    #[serde(default)]
    pub imu: ImuConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
}

fn default_duration() -> f64 {
    10.0
}
fn default_rate() -> f64 {
    10.0
}
fn default_robot_path() -> Vec<Waypoint> {
    vec![Waypoint { t: 0.0, p: [0.0, 0.0, 0.5], q: default_quat() }]
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty scenario parses")
    }
}

impl ScenarioSpec {
    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.rate_hz).ceil() as usize
    }

    pub fn frame_dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn camera_extrinsic(&self) -> Isometry3<f64> {
        (&self.camera.extrinsic).into()
    }

    pub fn lidar_extrinsic(&self) -> Isometry3<f64> {
        (&self.lidar.extrinsic).into()
    }

    /// Body id -> label, for oracle segmentation and evaluation.
    pub fn label_map(&self) -> std::collections::BTreeMap<u32, String> {
        self.bodies.iter().map(|b| (b.id, b.label.clone())).collect()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.rate_hz <= 0.0 {
            return Err(ScenarioError::NonPositive { field: "rate_hz", value: self.rate_hz });
        }
        if self.duration_s <= 0.0 {
            return Err(ScenarioError::NonPositive {
                field: "duration_s",
                value: self.duration_s,
            });
        }
        if self.lidar.max_range <= 0.0 {
            return Err(ScenarioError::NonPositive {
                field: "lidar.max_range",
                value: self.lidar.max_range,
            });
        }
        if self.camera.width < 1 || self.camera.height < 1 {
            return Err(ScenarioError::DegenerateCamera);
        }
        if self.robot_path.is_empty() {
            return Err(ScenarioError::EmptyRobotPath);
        }
        if !strictly_increasing(self.robot_path.iter().map(|w| w.t)) {
            return Err(ScenarioError::NonIncreasingWaypoints {
                context: "robot_path".to_string(),
            });
        }
        let mut seen = BTreeSet::new();
        for body in &self.bodies {
            if !seen.insert(body.id) {
                return Err(ScenarioError::DuplicateBodyId(body.id));
            }
            match &body.shape {
                Shape::Box { half_extents } => {
                    if half_extents.iter().any(|&h| h <= 0.0) {
                        return Err(ScenarioError::BadShape(body.id, "half_extents"));
                    }
                }
                Shape::Sphere { radius } => {
                    if *radius <= 0.0 {
                        return Err(ScenarioError::BadShape(body.id, "radius"));
                    }
                }
            }
            if let Motion::WaypointLoop { waypoints } = &body.motion {
                if waypoints.is_empty() || !strictly_increasing(waypoints.iter().map(|w| w.t)) {
                    return Err(ScenarioError::NonIncreasingWaypoints {
                        context: format!("body {}", body.id),
                    });
                }
            }
        }
        Ok(())
    }
}

fn strictly_increasing<I: Iterator<Item = f64>>(mut it: I) -> bool {
    let mut prev = match it.next() {
        Some(v) => v,
        None => return true,
    };
    for v in it {
        if v <= prev {
            return false;
        }
        prev = v;
    }
    true
}

/// Parse and validate a scenario from JSON text.
pub fn load_scenario_str(source: &str) -> Result<ScenarioSpec, ScenarioError> {
    let spec: ScenarioSpec = serde_json::from_str(source)?;
    spec.validate()?;
    Ok(spec)
}

/// Parse and validate a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioSpec, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    load_scenario_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let spec = load_scenario_str(
            r#"{
                "duration_s": 10.0,
                "rate_hz": 10.0,
                "bodies": [{"id": 1, "shape": {"type": "box", "half_extents": [0.5, 0.5, 0.5]},
                            "pose": {"p": [3.0, 0.0, 0.5], "q": [1, 0, 0, 0]}}]
            }"#,
        )
        .unwrap();
        assert_eq!(spec.seed, 0);
        assert_eq!(spec.frame_count(), 100);
        assert_eq!(spec.lidar.azimuth_count, 360);
        assert_eq!(spec.lidar.elevation_rings, 16);
        assert_eq!(spec.lidar.max_range, 50.0);
        assert_eq!(spec.camera.width, 64);
        assert_eq!(spec.bodies[0].label, "object");
        assert!(matches!(spec.bodies[0].motion, Motion::Static));
    }

    #[test]
    fn duplicate_body_ids_rejected() {
        let err = load_scenario_str(
            r#"{"bodies": [
                {"id": 3, "shape": {"type": "sphere", "radius": 1.0}},
                {"id": 3, "shape": {"type": "sphere", "radius": 2.0}}
            ]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ScenarioError::DuplicateBodyId(3)));
    }

    #[test]
    fn zero_rate_rejected() {
        let err = load_scenario_str(r#"{"rate_hz": 0.0}"#).unwrap_err();
        assert!(matches!(err, ScenarioError::NonPositive { field: "rate_hz", .. }));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(load_scenario_str(r#"{"rate": 10.0}"#).is_err());
    }

    #[test]
    fn non_increasing_waypoints_rejected() {
        let err = load_scenario_str(
            r#"{"bodies": [{"id": 1, "shape": {"type": "sphere", "radius": 1.0},
                "motion": {"type": "waypoint_loop", "waypoints": [
                    {"t": 0.0, "p": [0, 0, 0]}, {"t": 0.0, "p": [1, 0, 0]}
                ]}}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ScenarioError::NonIncreasingWaypoints { .. }));
    }

    #[test]
    fn gnss_availability_windows() {
        let g = GnssConfig {
            sigma_pos: 0.1,
            sigma_rot: 0.0,
            availability: Some(vec![[0.0, 2.0], [5.0, 6.0]]),
        };
        assert!(g.available_at(0.0));
        assert!(g.available_at(1.99));
        assert!(!g.available_at(2.0));
        assert!(!g.available_at(4.0));
        assert!(g.available_at(5.0));
        let always = GnssConfig::default();
        assert!(always.available_at(123.0));
    }
}
