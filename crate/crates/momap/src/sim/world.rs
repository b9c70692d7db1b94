//! World state evolution: scripted body motion and the robot trajectory.

use std::collections::BTreeMap;

use nalgebra::{Isometry3, Translation3, Vector3};

use super::scenario::{Motion, ScenarioSpec, Waypoint};
use crate::geom::interpolate_pose;

/// Pose snapshot of everything in the world at one instant.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub t: f64,
    pub body_poses: BTreeMap<u32, Isometry3<f64>>,
    pub robot_pose_true: Isometry3<f64>,
    pub robot_vel_true: Vector3<f64>,
    pub robot_acc_true: Vector3<f64>,
}

/// Clamped interpolation along a timed waypoint list: holds the first pose
/// before the path starts and the last pose after it ends.
pub fn sample_path(waypoints: &[Waypoint], t: f64) -> Isometry3<f64> {
    assert!(!waypoints.is_empty());
    if t <= waypoints[0].t {
        return waypoints[0].pose();
    }
    if t >= waypoints[waypoints.len() - 1].t {
        return waypoints[waypoints.len() - 1].pose();
    }
    let idx = waypoints.partition_point(|w| w.t <= t);
    let a = &waypoints[idx - 1];
    let b = &waypoints[idx];
    let s = (t - a.t) / (b.t - a.t);
    interpolate_pose(&a.pose(), &b.pose(), s)
}

/// Piecewise-linear path velocity (zero while holding an endpoint).
pub fn sample_path_velocity(waypoints: &[Waypoint], t: f64) -> Vector3<f64> {
    assert!(!waypoints.is_empty());
    if t < waypoints[0].t || t >= waypoints[waypoints.len() - 1].t {
        return Vector3::zeros();
    }
    let idx = waypoints.partition_point(|w| w.t <= t);
    let a = &waypoints[idx - 1];
    let b = &waypoints[idx];
    (Vector3::from(b.p) - Vector3::from(a.p)) / (b.t - a.t)
}

/// Pose of a looping waypoint body: time wraps modulo the loop period, so
/// after one full period the body is back at its first waypoint.
fn sample_loop(waypoints: &[Waypoint], t: f64) -> Isometry3<f64> {
    let t0 = waypoints[0].t;
    let t1 = waypoints[waypoints.len() - 1].t;
    let period = t1 - t0;
    if period <= 0.0 {
        return waypoints[0].pose();
    }
    let wrapped = t0 + (t - t0).rem_euclid(period);
    sample_path(waypoints, wrapped)
}

/// Body pose at absolute time `t` (scripted motion is closed-form in `t`).
pub fn body_pose_at(body: &super::scenario::RigidBody, t: f64) -> Isometry3<f64> {
    match &body.motion {
        Motion::Static => body.initial_pose(),
        Motion::ConstantVelocity { v } => {
            let base = body.initial_pose();
            let shift = Vector3::from(*v) * t;
            Isometry3::from_parts(
                Translation3::from(base.translation.vector + shift),
                base.rotation,
            )
        }
        Motion::WaypointLoop { waypoints } => sample_loop(waypoints, t),
    }
}

/// World state at absolute time `t`.
pub fn world_at(spec: &ScenarioSpec, t: f64) -> WorldState {
    let body_poses = spec
        .bodies
        .iter()
        .filter(|b| b.alive_at(t))
        .map(|b| (b.id, body_pose_at(b, t)))
        .collect();
    WorldState {
        t,
        body_poses,
        robot_pose_true: sample_path(&spec.robot_path, t),
        robot_vel_true: sample_path_velocity(&spec.robot_path, t),
        // Piecewise-linear robot paths have zero acceleration between knots.
        robot_acc_true: Vector3::zeros(),
    }
}

/// Advance a state by `dt`. Panics in debug builds on non-positive `dt`.
pub fn step_world(state: &WorldState, spec: &ScenarioSpec, dt: f64) -> WorldState {
    assert!(dt > 0.0, "step_world requires dt > 0");
    world_at(spec, state.t + dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::{load_scenario_str, RigidBody, Shape};
    use nalgebra::UnitQuaternion;

    fn body(motion: Motion) -> RigidBody {
        RigidBody {
            id: 1,
            shape: Shape::Sphere { radius: 1.0 },
            color: [1.0, 0.0, 0.0],
            label: "ball".into(),
            pose: Some(crate::geom::PoseDto { p: [2.0, 0.0, 0.0], q: [1.0, 0.0, 0.0, 0.0] }),
            motion,
            interactive_state: None,
            lifetime: None,
        }
    }

    #[test]
    fn constant_velocity_advances_by_v_dt() {
        let b = body(Motion::ConstantVelocity { v: [1.0, 0.0, 0.0] });
        let p0 = body_pose_at(&b, 0.0).translation.vector;
        let p1 = body_pose_at(&b, 0.1).translation.vector;
        assert!(((p1 - p0).x - 0.1).abs() < 1e-12);
        assert_eq!((p1 - p0).y, 0.0);
    }

    #[test]
    fn static_body_never_moves() {
        let b = body(Motion::Static);
        let p0 = body_pose_at(&b, 0.0);
        let p1 = body_pose_at(&b, 123.456);
        assert_eq!(p0.translation.vector, p1.translation.vector);
    }

    #[test]
    fn waypoint_loop_returns_to_start_after_period() {
        let waypoints = vec![
            Waypoint { t: 0.0, p: [0.0, 0.0, 0.0], q: [1.0, 0.0, 0.0, 0.0] },
            Waypoint { t: 2.0, p: [4.0, 0.0, 0.0], q: [1.0, 0.0, 0.0, 0.0] },
            Waypoint { t: 4.0, p: [0.0, 4.0, 0.0], q: [1.0, 0.0, 0.0, 0.0] },
        ];
        let b = body(Motion::WaypointLoop { waypoints });
        let start = body_pose_at(&b, 0.0).translation.vector;
        let after_period = body_pose_at(&b, 4.0).translation.vector;
        assert!((start - after_period).norm() <= 1e-9);
        // Mid-segment interpolation is linear.
        let mid = body_pose_at(&b, 1.0).translation.vector;
        assert!((mid - Vector3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn robot_path_holds_final_pose() {
        let spec = load_scenario_str(
            r#"{"robot_path": [
                {"t": 0.0, "p": [0, 0, 0.5]},
                {"t": 1.0, "p": [1, 0, 0.5]}
            ]}"#,
        )
        .unwrap();
        let end = sample_path(&spec.robot_path, 99.0).translation.vector;
        assert_eq!(end.x, 1.0);
        assert_eq!(sample_path_velocity(&spec.robot_path, 99.0).norm(), 0.0);
        let v = sample_path_velocity(&spec.robot_path, 0.5);
        assert!((v.x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_world_advances_time() {
        let spec = load_scenario_str("{}").unwrap();
        let s0 = world_at(&spec, 0.0);
        let s1 = step_world(&s0, &spec, 0.25);
        assert!((s1.t - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rotation_interpolates_spherically() {
        let waypoints = vec![
            Waypoint { t: 0.0, p: [0.0; 3], q: [1.0, 0.0, 0.0, 0.0] },
            Waypoint {
                t: 1.0,
                p: [0.0; 3],
                q: {
                    let q = UnitQuaternion::from_euler_angles(0.0, 0.0, 1.0);
                    let c = q.quaternion();
                    [c.w, c.i, c.j, c.k]
                },
            },
        ];
        let pose = sample_path(&waypoints, 0.5);
        assert!((pose.rotation.angle() - 0.5).abs() < 1e-9);
    }
}
