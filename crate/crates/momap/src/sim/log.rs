//! Sensor-log layout: one JSON metadata file plus raw binary channels per
//! frame, and a single ground-truth file for the whole run.
//!
//! Binary channels are little-endian:
//! - `frame_%06d.depth.bin` — f32 per pixel, row major
//! - `frame_%06d.color.bin` — 3×f32 per pixel, row major
//! - `frame_%06d.mask.bin`  — u32 per pixel, row major
//! - `frame_%06d.pcl.bin`   — records of `x,y,z (f64), id (u32), r,g,b (f32)`

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::render::{render_frame, LidarPoint, SensorFrame};
use super::scenario::ScenarioSpec;
use super::world::{world_at, WorldState};
use crate::geom::PoseDto;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("sensor log I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("sensor log metadata does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("binary channel {path} has unexpected size {got} (want {want})")]
    BadChannelSize { path: String, got: usize, want: usize },
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameMeta {
    index: usize,
    t: f64,
    width: u32,
    height: u32,
    pcl_count: usize,
    gnss_pose: Option<PoseDto>,
    imu_vel: Option<[f64; 3]>,
    imu_acc: Option<[f64; 3]>,
}

/// Per-frame ground truth for evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthFrame {
    pub t: f64,
    pub robot: PoseDto,
    pub robot_vel: [f64; 3],
    pub robot_acc: [f64; 3],
    pub bodies: BTreeMap<u32, PoseDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub labels: BTreeMap<u32, String>,
    pub frames: Vec<TruthFrame>,
}

impl GroundTruth {
    pub fn true_pose(&self, frame_idx: usize) -> nalgebra::Isometry3<f64> {
        (&self.frames[frame_idx].robot).into()
    }
}

fn truth_frame(state: &WorldState) -> TruthFrame {
    TruthFrame {
        t: state.t,
        robot: (&state.robot_pose_true).into(),
        robot_vel: state.robot_vel_true.into(),
        robot_acc: state.robot_acc_true.into(),
        bodies: state.body_poses.iter().map(|(id, p)| (*id, p.into())).collect(),
    }
}

/// Simulate every frame of `spec` in memory.
pub fn simulate(spec: &ScenarioSpec) -> (Vec<SensorFrame>, GroundTruth) {
    let dt = spec.frame_dt();
    let n = spec.frame_count();
    let mut frames = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let state = world_at(spec, i as f64 * dt);
        frames.push(render_frame(spec, &state, i));
        truth.push(truth_frame(&state));
    }
    (frames, GroundTruth { labels: spec.label_map(), frames: truth })
}

fn frame_paths(dir: &Path, index: usize) -> (PathBuf, PathBuf, PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("frame_{index:06}.json")),
        dir.join(format!("frame_{index:06}.depth.bin")),
        dir.join(format!("frame_{index:06}.color.bin")),
        dir.join(format!("frame_{index:06}.mask.bin")),
        dir.join(format!("frame_{index:06}.pcl.bin")),
    )
}

fn write_frame(dir: &Path, frame: &SensorFrame) -> Result<(), LogError> {
    let (meta_p, depth_p, color_p, mask_p, pcl_p) = frame_paths(dir, frame.index);
    let meta = FrameMeta {
        index: frame.index,
        t: frame.t,
        width: frame.width,
        height: frame.height,
        pcl_count: frame.pcl.len(),
        gnss_pose: frame.gnss_pose.as_ref().map(|p| p.into()),
        imu_vel: frame.imu_vel.map(|v| v.into()),
        imu_acc: frame.imu_acc.map(|v| v.into()),
    };
    fs::write(&meta_p, serde_json::to_vec_pretty(&meta)?)?;

    let mut depth_buf = Vec::with_capacity(frame.depth.len() * 4);
    for d in &frame.depth {
        depth_buf.extend_from_slice(&d.to_le_bytes());
    }
    fs::write(&depth_p, depth_buf)?;

    let mut color_buf = Vec::with_capacity(frame.color.len() * 4);
    for c in &frame.color {
        color_buf.extend_from_slice(&c.to_le_bytes());
    }
    fs::write(&color_p, color_buf)?;

    let mut mask_buf = Vec::with_capacity(frame.instance_mask.len() * 4);
    for m in &frame.instance_mask {
        mask_buf.extend_from_slice(&m.to_le_bytes());
    }
    fs::write(&mask_p, mask_buf)?;

    let mut pcl_buf = Vec::with_capacity(frame.pcl.len() * 40);
    for p in &frame.pcl {
        pcl_buf.extend_from_slice(&p.pos.x.to_le_bytes());
        pcl_buf.extend_from_slice(&p.pos.y.to_le_bytes());
        pcl_buf.extend_from_slice(&p.pos.z.to_le_bytes());
        pcl_buf.extend_from_slice(&p.body_id.to_le_bytes());
        for c in p.color {
            pcl_buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    fs::write(&pcl_p, pcl_buf)?;
    Ok(())
}

/// Simulate and persist a full run. Returns the in-memory frames as well,
/// so callers that keep going do not have to re-read them.
pub fn run_simulation(
    spec: &ScenarioSpec,
    out_dir: &Path,
) -> Result<(Vec<SensorFrame>, GroundTruth), LogError> {
    fs::create_dir_all(out_dir)?;
    let (frames, truth) = simulate(spec);
    for frame in &frames {
        write_frame(out_dir, frame)?;
    }
    fs::write(out_dir.join("ground_truth.json"), serde_json::to_vec_pretty(&truth)?)?;
    // Keep the generating scenario next to the data for later evaluation.
    fs::write(out_dir.join("scenario.json"), serde_json::to_vec_pretty(spec)?)?;
    Ok((frames, truth))
}

fn read_exact_file(path: &Path) -> Result<Vec<u8>, LogError> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

fn read_frame(dir: &Path, index: usize) -> Result<SensorFrame, LogError> {
    let (meta_p, depth_p, color_p, mask_p, pcl_p) = frame_paths(dir, index);
    let meta: FrameMeta = serde_json::from_slice(&read_exact_file(&meta_p)?)?;
    let n_px = (meta.width * meta.height) as usize;

    let depth_raw = read_exact_file(&depth_p)?;
    if depth_raw.len() != n_px * 4 {
        return Err(LogError::BadChannelSize {
            path: depth_p.display().to_string(),
            got: depth_raw.len(),
            want: n_px * 4,
        });
    }
    let depth = depth_raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();

    let color_raw = read_exact_file(&color_p)?;
    if color_raw.len() != n_px * 12 {
        return Err(LogError::BadChannelSize {
            path: color_p.display().to_string(),
            got: color_raw.len(),
            want: n_px * 12,
        });
    }
    let color = color_raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();

    let mask_raw = read_exact_file(&mask_p)?;
    if mask_raw.len() != n_px * 4 {
        return Err(LogError::BadChannelSize {
            path: mask_p.display().to_string(),
            got: mask_raw.len(),
            want: n_px * 4,
        });
    }
    let instance_mask = mask_raw
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .collect();

    let pcl_raw = read_exact_file(&pcl_p)?;
    if pcl_raw.len() != meta.pcl_count * 40 {
        return Err(LogError::BadChannelSize {
            path: pcl_p.display().to_string(),
            got: pcl_raw.len(),
            want: meta.pcl_count * 40,
        });
    }
    let pcl = pcl_raw
        .chunks_exact(40)
        .map(|rec| LidarPoint {
            pos: Vector3::new(
                f64::from_le_bytes(rec[0..8].try_into().unwrap()),
                f64::from_le_bytes(rec[8..16].try_into().unwrap()),
                f64::from_le_bytes(rec[16..24].try_into().unwrap()),
            ),
            body_id: u32::from_le_bytes(rec[24..28].try_into().unwrap()),
            color: [
                f32::from_le_bytes(rec[28..32].try_into().unwrap()),
                f32::from_le_bytes(rec[32..36].try_into().unwrap()),
                f32::from_le_bytes(rec[36..40].try_into().unwrap()),
            ],
        })
        .collect();

    Ok(SensorFrame {
        index: meta.index,
        t: meta.t,
        width: meta.width,
        height: meta.height,
        color,
        depth,
        instance_mask,
        pcl,
        gnss_pose: meta.gnss_pose.as_ref().map(Into::into),
        imu_vel: meta.imu_vel.map(Vector3::from),
        imu_acc: meta.imu_acc.map(Vector3::from),
    })
}

/// Load a persisted sensor log (frames, ground truth, and the scenario
/// that generated it).
pub fn load_log(dir: &Path) -> Result<(Vec<SensorFrame>, GroundTruth, ScenarioSpec), LogError> {
    let truth: GroundTruth =
        serde_json::from_slice(&read_exact_file(&dir.join("ground_truth.json"))?)?;
    let spec: ScenarioSpec =
        serde_json::from_slice(&read_exact_file(&dir.join("scenario.json"))?)?;
    let mut frames = Vec::with_capacity(truth.frames.len());
    for i in 0..truth.frames.len() {
        frames.push(read_frame(dir, i)?);
    }
    Ok((frames, truth, spec))
}

/// Convenience writer used by several output paths.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), LogError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::load_scenario_str;

    fn small_spec(seed: u64) -> ScenarioSpec {
        let mut spec = load_scenario_str(
            r#"{
                "duration_s": 2.0,
                "rate_hz": 10.0,
                "camera": {"width": 16, "height": 12, "fx": 12.0, "fy": 12.0, "cx": 8.0, "cy": 6.0},
                "lidar": {"azimuth_count": 24, "elevation_rings": 2},
                "gnss": {"sigma_pos": 0.1, "sigma_rot": 0.01},
                "imu": {"sigma_vel": 0.05, "sigma_acc": 0.05},
                "noise": {"lidar_sigma_range": 0.02},
                "bodies": [{"id": 1, "shape": {"type": "box", "half_extents": [1, 1, 1]},
                            "pose": {"p": [4.0, 0.0, 0.0]}}],
                "robot_path": [{"t": 0.0, "p": [0, 0, 0]}, {"t": 2.0, "p": [1, 0, 0]}]
            }"#,
        )
        .unwrap();
        spec.seed = seed;
        spec
    }

    fn dir_digest(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut entries: Vec<_> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        entries
            .into_iter()
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
            .collect()
    }

    #[test]
    fn frame_count_matches_duration_times_rate() {
        let spec = small_spec(1);
        let tmp = tempfile::tempdir().unwrap();
        let (frames, _) = run_simulation(&spec, tmp.path()).unwrap();
        assert_eq!(frames.len(), 20);
        assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 20 * 5 + 2);
    }

    #[test]
    fn identical_seed_gives_byte_identical_logs() {
        let spec = small_spec(42);
        let (t1, t2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_simulation(&spec, t1.path()).unwrap();
        run_simulation(&spec, t2.path()).unwrap();
        assert_eq!(dir_digest(t1.path()), dir_digest(t2.path()));
    }

    #[test]
    fn seed_changes_noise_but_not_truth() {
        let (fa, truth_a) = simulate(&small_spec(1));
        let (fb, truth_b) = simulate(&small_spec(2));
        // Same true trajectory.
        for (a, b) in truth_a.frames.iter().zip(&truth_b.frames) {
            assert_eq!(a.robot.p, b.robot.p);
        }
        // Different noise draws.
        let ga = fa[0].gnss_pose.unwrap().translation.vector;
        let gb = fb[0].gnss_pose.unwrap().translation.vector;
        assert_ne!(ga, gb);
        assert_ne!(fa[0].pcl[0].pos, fb[0].pcl[0].pos);
    }

    #[test]
    fn log_round_trip_preserves_frames() {
        let spec = small_spec(9);
        let tmp = tempfile::tempdir().unwrap();
        let (frames, truth) = run_simulation(&spec, tmp.path()).unwrap();
        let (loaded, loaded_truth, loaded_spec) = load_log(tmp.path()).unwrap();
        assert_eq!(loaded.len(), frames.len());
        assert_eq!(loaded_spec, spec);
        assert_eq!(loaded_truth.labels, truth.labels);
        for (a, b) in frames.iter().zip(&loaded) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.depth, b.depth);
            assert_eq!(a.color, b.color);
            assert_eq!(a.instance_mask, b.instance_mask);
            assert_eq!(a.pcl, b.pcl);
            assert_eq!(a.imu_vel.is_some(), b.imu_vel.is_some());
        }
    }
}
