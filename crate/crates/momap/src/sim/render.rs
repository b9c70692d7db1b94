//! Analytic sensor rendering: per-pixel ray casting for the depth camera,
//! pattern sampling for the lidar, and noise injection for GNSS/IMU.

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::scenario::{ScenarioSpec, Shape};
use super::world::WorldState;
use crate::rng;

/// One lidar return in the sensor frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarPoint {
    pub pos: Vector3<f64>,
    /// True body id of the surface hit (evaluation channel).
    pub body_id: u32,
    pub color: [f32; 3],
}

/// One synchronized step of every sensor stream.
#[derive(Debug, Clone)]
pub struct SensorFrame {
    pub index: usize,
    pub t: f64,
    pub width: u32,
    pub height: u32,
    /// Row-major RGB triples in `[0,1]`.
    pub color: Vec<f32>,
    /// Row-major distance along each pixel ray, `+inf` where nothing is hit.
    pub depth: Vec<f32>,
    /// Row-major body id per pixel, 0 = background.
    pub instance_mask: Vec<u32>,
    pub pcl: Vec<LidarPoint>,
    pub gnss_pose: Option<Isometry3<f64>>,
    pub imu_vel: Option<Vector3<f64>>,
    pub imu_acc: Option<Vector3<f64>>,
}

impl SensorFrame {
    pub fn pixel_index(&self, row: u32, col: u32) -> usize {
        (row * self.width + col) as usize
    }
}

/// Nearest ray hit: distance along the unit direction plus the body id.
#[derive(Debug, Clone, Copy)]
pub struct Hit {
    pub range: f64,
    pub body_id: u32,
}

fn ray_sphere(origin: &Vector3<f64>, dir: &Vector3<f64>, center: &Vector3<f64>, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.norm_squared() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sqrt_disc = disc.sqrt();
    let t0 = -b - sqrt_disc;
    if t0 > 1e-9 {
        return Some(t0);
    }
    let t1 = -b + sqrt_disc;
    if t1 > 1e-9 {
        return Some(t1);
    }
    None
}

/// Slab test against a box of half-extents `half` centered at the local origin.
fn ray_box_local(origin: &Vector3<f64>, dir: &Vector3<f64>, half: &Vector3<f64>) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for i in 0..3 {
        if dir[i].abs() < 1e-15 {
            if origin[i].abs() > half[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dir[i];
        let mut t0 = (-half[i] - origin[i]) * inv;
        let mut t1 = (half[i] - origin[i]) * inv;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    if t_near > 1e-9 {
        Some(t_near)
    } else if t_far > 1e-9 {
        Some(t_far)
    } else {
        None
    }
}

/// Cast one world-frame ray against every body alive in `state`.
pub fn cast_ray(
    spec: &ScenarioSpec,
    state: &WorldState,
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for body in &spec.bodies {
        let Some(pose) = state.body_poses.get(&body.id) else {
            continue;
        };
        let range = match &body.shape {
            Shape::Sphere { radius } => {
                let center = pose.translation.vector;
                ray_sphere(origin, dir, &center, *radius)
            }
            Shape::Box { half_extents } => {
                let inv = pose.inverse();
                let local_origin = inv * Point3::from(*origin);
                let local_dir = inv.rotation * dir;
                ray_box_local(&local_origin.coords, &local_dir, &Vector3::from(*half_extents))
            }
        };
        if let Some(r) = range {
            if best.map_or(true, |h| r < h.range) {
                best = Some(Hit { range: r, body_id: body.id });
            }
        }
    }
    best
}

fn body_color(spec: &ScenarioSpec, id: u32) -> [f32; 3] {
    spec.bodies
        .iter()
        .find(|b| b.id == id)
        .map(|b| [b.color[0] as f32, b.color[1] as f32, b.color[2] as f32])
        .unwrap_or([0.0; 3])
}

/// Unit direction through pixel `(row, col)` in the camera frame
/// (+z forward, +x right, +y down). Rays pass through pixel centers.
pub fn pixel_ray(cam: &super::scenario::CameraConfig, row: u32, col: u32) -> Vector3<f64> {
    let u = col as f64 + 0.5;
    let v = row as f64 + 0.5;
    Vector3::new((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0).normalize()
}

/// Beam directions of the lidar pattern in the lidar frame, scan order:
/// all azimuths of ring 0, then ring 1, and so on.
pub fn lidar_directions(lidar: &super::scenario::LidarConfig) -> Vec<Vector3<f64>> {
    let mut dirs = Vec::with_capacity((lidar.azimuth_count * lidar.elevation_rings) as usize);
    for ring in 0..lidar.elevation_rings {
        let elev = if lidar.elevation_rings == 1 {
            0.5 * (lidar.elevation_min_deg + lidar.elevation_max_deg)
        } else {
            lidar.elevation_min_deg
                + (lidar.elevation_max_deg - lidar.elevation_min_deg) * ring as f64
                    / (lidar.elevation_rings - 1) as f64
        }
        .to_radians();
        for az_i in 0..lidar.azimuth_count {
            let az = 2.0 * std::f64::consts::PI * az_i as f64 / lidar.azimuth_count as f64;
            dirs.push(Vector3::new(
                elev.cos() * az.cos(),
                elev.cos() * az.sin(),
                elev.sin(),
            ));
        }
    }
    dirs
}

/// Render every sensor channel for the world state at frame `index`.
pub fn render_frame(spec: &ScenarioSpec, state: &WorldState, index: usize) -> SensorFrame {
    let cam = &spec.camera;
    let world_from_cam = state.robot_pose_true * spec.camera_extrinsic();
    let cam_origin = world_from_cam.translation.vector;

    let n_px = (cam.width * cam.height) as usize;
    let mut color = vec![0.0f32; n_px * 3];
    let mut depth = vec![f32::INFINITY; n_px];
    let mut mask = vec![0u32; n_px];

    for row in 0..cam.height {
        for col in 0..cam.width {
            let dir_world = world_from_cam.rotation * pixel_ray(cam, row, col);
            if let Some(hit) = cast_ray(spec, state, &cam_origin, &dir_world) {
                let i = (row * cam.width + col) as usize;
                depth[i] = hit.range as f32;
                mask[i] = hit.body_id;
                let c = body_color(spec, hit.body_id);
                color[i * 3..i * 3 + 3].copy_from_slice(&c);
            }
        }
    }

    // Lidar sweep with per-frame range-noise stream.
    let world_from_lidar = state.robot_pose_true * spec.lidar_extrinsic();
    let lidar_origin = world_from_lidar.translation.vector;
    let lidar_from_world = world_from_lidar.inverse();
    let mut lidar_rng = rng::stream(spec.seed, "lidar_range", index as u64);
    let range_noise = Normal::new(0.0, spec.noise.lidar_sigma_range.max(0.0)).unwrap();
    let mut pcl = Vec::new();
    for dir in lidar_directions(&spec.lidar) {
        let dir_world = world_from_lidar.rotation * dir;
        let Some(hit) = cast_ray(spec, state, &lidar_origin, &dir_world) else {
            continue;
        };
        if hit.range > spec.lidar.max_range {
            continue;
        }
        let noisy_range = if spec.noise.lidar_sigma_range > 0.0 {
            (hit.range + range_noise.sample(&mut lidar_rng)).clamp(0.0, spec.lidar.max_range)
        } else {
            hit.range
        };
        let p_world = lidar_origin + dir_world * noisy_range;
        let p_sensor = lidar_from_world * Point3::from(p_world);
        pcl.push(LidarPoint {
            pos: p_sensor.coords,
            body_id: hit.body_id,
            color: body_color(spec, hit.body_id),
        });
    }

    // GNSS fix, present only inside an availability window.
    let gnss_pose = if spec.gnss.available_at(state.t) {
        let mut g_rng = rng::stream(spec.seed, "gnss", index as u64);
        let truth = state.robot_pose_true;
        let pos_noise = Normal::new(0.0, spec.gnss.sigma_pos.max(0.0)).unwrap();
        let rot_noise = Normal::new(0.0, spec.gnss.sigma_rot.max(0.0)).unwrap();
        let dp = Vector3::new(
            pos_noise.sample(&mut g_rng),
            pos_noise.sample(&mut g_rng),
            pos_noise.sample(&mut g_rng),
        );
        let dw = Vector3::new(
            rot_noise.sample(&mut g_rng),
            rot_noise.sample(&mut g_rng),
            rot_noise.sample(&mut g_rng),
        );
        Some(Isometry3::from_parts(
            Translation3::from(truth.translation.vector + dp),
            truth.rotation * UnitQuaternion::from_scaled_axis(dw),
        ))
    } else {
        None
    };

    let (imu_vel, imu_acc) = if spec.imu.enabled {
        let mut i_rng = rng::stream(spec.seed, "imu", index as u64);
        let vel_noise = Normal::new(0.0, spec.imu.sigma_vel.max(0.0)).unwrap();
        let acc_noise = Normal::new(0.0, spec.imu.sigma_acc.max(0.0)).unwrap();
        let nv = Vector3::new(
            vel_noise.sample(&mut i_rng),
            vel_noise.sample(&mut i_rng),
            vel_noise.sample(&mut i_rng),
        );
        let na = Vector3::new(
            acc_noise.sample(&mut i_rng),
            acc_noise.sample(&mut i_rng),
            acc_noise.sample(&mut i_rng),
        );
        (Some(state.robot_vel_true + nv), Some(state.robot_acc_true + na))
    } else {
        (None, None)
    };

    let _ = lidar_rng.random::<u8>(); // keep the stream used even for zero noise

    SensorFrame {
        index,
        t: state.t,
        width: cam.width,
        height: cam.height,
        color,
        depth,
        instance_mask: mask,
        pcl,
        gnss_pose,
        imu_vel,
        imu_acc,
    }
}
