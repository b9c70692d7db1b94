//! Image-branch object recognition: either oracle instance masks or
//! depth-gap connected components, behind the same interface that a
//! learned open-vocabulary segmenter would implement.

use std::collections::BTreeMap;

use nalgebra::{Isometry3, Point3, Vector3};
use thiserror::Error;

use super::descriptor::encode_descriptor;
use super::observation::{CalibrationSet, ObjectObservation, ObservationSource};
use crate::geom::{cosine, Aabb};
use crate::sim::{pixel_ray, CameraConfig, SensorFrame};

#[derive(Debug, Error)]
pub enum ImageSegmentError {
    #[error("frame is missing its depth channel")]
    MissingDepth,
    #[error("descriptor failure: {0}")]
    Descriptor(#[from] super::descriptor::DescriptorError),
}

#[derive(Debug, Clone)]
pub enum SegmentationMode {
    /// Group pixels by the simulator's instance mask; labels come from the
    /// provided id -> label map (the oracle stand-in for a recognizer).
    OracleMask { labels: BTreeMap<u32, String> },
    /// Connected components over pixels whose depth differs from a
    /// 4-neighbor by at most `depth_gap` meters. Components smaller than
    /// `min_pixels` (grazing-angle slivers, single-pixel edges) are noise.
    DepthCluster { depth_gap: f64, min_pixels: usize },
}

/// Multimodal-query gate: observations whose descriptor cosine to the
/// query falls below `min_cosine` are dropped.
#[derive(Debug, Clone)]
pub struct QueryGate {
    pub embedding: Vec<f64>,
    pub min_cosine: f64,
}

struct PixelGroup {
    pixels: Vec<u32>,
    points_world: Vec<Vector3<f64>>,
    colors: Vec<[f32; 3]>,
    mask_votes: BTreeMap<u32, usize>,
}

impl PixelGroup {
    fn new() -> Self {
        Self {
            pixels: Vec::new(),
            points_world: Vec::new(),
            colors: Vec::new(),
            mask_votes: BTreeMap::new(),
        }
    }

    fn majority_id(&self) -> Option<u32> {
        self.mask_votes
            .iter()
            .max_by_key(|(id, n)| (**n, std::cmp::Reverse(**id)))
            .map(|(id, _)| *id)
    }
}

/// Segment one frame into world-frame object observations.
///
/// `world_from_base` is the reference pose associated with the frame
/// (the odometry estimate during live runs, ground truth in oracles).
pub fn segment_image_frame(
    frame: &SensorFrame,
    camera: &CameraConfig,
    calib: &CalibrationSet,
    world_from_base: &Isometry3<f64>,
    mode: &SegmentationMode,
    query: Option<&QueryGate>,
) -> Result<Vec<ObjectObservation>, ImageSegmentError> {
    if frame.depth.len() != (frame.width * frame.height) as usize {
        return Err(ImageSegmentError::MissingDepth);
    }
    let world_from_cam = world_from_base * calib.camera_to_base;

    let groups = match mode {
        SegmentationMode::OracleMask { .. } => group_by_mask(frame, camera, &world_from_cam),
        SegmentationMode::DepthCluster { depth_gap, .. } => {
            cluster_by_depth(frame, camera, &world_from_cam, *depth_gap)
        }
    };
    let min_pixels = match mode {
        SegmentationMode::OracleMask { .. } => 1,
        SegmentationMode::DepthCluster { min_pixels, .. } => (*min_pixels).max(1),
    };

    let mut out = Vec::new();
    for group in groups {
        if group.points_world.len() < min_pixels {
            continue;
        }
        let true_id = group.majority_id();
        let (label, confidence) = match mode {
            SegmentationMode::OracleMask { labels } => {
                let label = true_id
                    .and_then(|id| labels.get(&id).cloned())
                    .unwrap_or_else(|| "object".to_string());
                (label, 1.0)
            }
            SegmentationMode::DepthCluster { .. } => {
                let n = group.pixels.len() as f64;
                ("object".to_string(), n / (n + 50.0))
            }
        };
        let embedding = encode_descriptor(&group.points_world, &group.colors, Some(&label))?;
        if let Some(gate) = query {
            if cosine(&embedding, &gate.embedding) < gate.min_cosine {
                continue;
            }
        }
        let aabb = Aabb::from_points(group.points_world.iter()).expect("non-empty group");
        let centroid = group.points_world.iter().sum::<Vector3<f64>>()
            / group.points_world.len() as f64;
        out.push(ObjectObservation {
            source: ObservationSource::Image,
            aabb_world: aabb,
            centroid,
            mask_pixels: Some(group.pixels),
            point_indices: None,
            label,
            embedding,
            confidence,
            true_id,
        });
    }
    // Deterministic output order: by majority id, then pixel count.
    out.sort_by_key(|o| (o.true_id.unwrap_or(u32::MAX), o.mask_pixels.as_ref().map_or(0, |p| p.len())));
    Ok(out)
}

fn back_project(
    frame: &SensorFrame,
    camera: &CameraConfig,
    world_from_cam: &Isometry3<f64>,
    row: u32,
    col: u32,
) -> Vector3<f64> {
    let range = frame.depth[frame.pixel_index(row, col)] as f64;
    let dir = pixel_ray(camera, row, col);
    (world_from_cam * Point3::from(dir * range)).coords
}

fn push_pixel(
    group: &mut PixelGroup,
    frame: &SensorFrame,
    camera: &CameraConfig,
    world_from_cam: &Isometry3<f64>,
    row: u32,
    col: u32,
) {
    let i = frame.pixel_index(row, col);
    group.pixels.push(i as u32);
    group.points_world.push(back_project(frame, camera, world_from_cam, row, col));
    group
        .colors
        .push([frame.color[i * 3], frame.color[i * 3 + 1], frame.color[i * 3 + 2]]);
    *group.mask_votes.entry(frame.instance_mask[i]).or_insert(0) += 1;
}

fn group_by_mask(
    frame: &SensorFrame,
    camera: &CameraConfig,
    world_from_cam: &Isometry3<f64>,
) -> Vec<PixelGroup> {
    let mut groups: BTreeMap<u32, PixelGroup> = BTreeMap::new();
    for row in 0..frame.height {
        for col in 0..frame.width {
            let i = frame.pixel_index(row, col);
            let id = frame.instance_mask[i];
            if id == 0 || !frame.depth[i].is_finite() {
                continue;
            }
            let group = groups.entry(id).or_insert_with(PixelGroup::new);
            push_pixel(group, frame, camera, world_from_cam, row, col);
        }
    }
    groups.into_values().collect()
}

fn cluster_by_depth(
    frame: &SensorFrame,
    camera: &CameraConfig,
    world_from_cam: &Isometry3<f64>,
    depth_gap: f64,
) -> Vec<PixelGroup> {
    let (w, h) = (frame.width as i64, frame.height as i64);
    let mut visited = vec![false; (w * h) as usize];
    let mut groups = Vec::new();
    for row in 0..h {
        for col in 0..w {
            let i = (row * w + col) as usize;
            if visited[i] || !frame.depth[i].is_finite() {
                continue;
            }
            // Flood fill across small depth steps.
            let mut group = PixelGroup::new();
            let mut stack = vec![(row, col)];
            visited[i] = true;
            while let Some((r, c)) = stack.pop() {
                push_pixel(&mut group, frame, camera, world_from_cam, r as u32, c as u32);
                let d = frame.depth[(r * w + c) as usize];
                for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nr >= h || nc < 0 || nc >= w {
                        continue;
                    }
                    let ni = (nr * w + nc) as usize;
                    if visited[ni] || !frame.depth[ni].is_finite() {
                        continue;
                    }
                    if (frame.depth[ni] - d).abs() as f64 <= depth_gap {
                        visited[ni] = true;
                        stack.push((nr, nc));
                    }
                }
            }
            groups.push(group);
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{load_scenario_str, render_frame, world_at};

    fn two_box_scene() -> crate::sim::ScenarioSpec {
        // Thin frontal boxes: grazing side faces stay below a pixel.
        load_scenario_str(
            r#"{
                "camera": {"width": 48, "height": 36, "fx": 36.0, "fy": 36.0, "cx": 24.0, "cy": 18.0},
                "bodies": [
                    {"id": 1, "shape": {"type": "box", "half_extents": [0.05, 0.4, 0.4]},
                     "label": "crate", "color": [0.8, 0.1, 0.1], "pose": {"p": [4.0, 1.2, 0.0]}},
                    {"id": 2, "shape": {"type": "box", "half_extents": [0.05, 0.4, 0.4]},
                     "label": "bin", "color": [0.1, 0.1, 0.8], "pose": {"p": [4.0, -1.2, 0.0]}}
                ],
                "robot_path": [{"t": 0.0, "p": [0.0, 0.0, 0.0]}]
            }"#,
        )
        .unwrap()
    }

    fn calib(spec: &crate::sim::ScenarioSpec) -> CalibrationSet {
        CalibrationSet {
            camera_to_base: spec.camera_extrinsic(),
            lidar_to_base: spec.lidar_extrinsic(),
        }
    }

    #[test]
    fn oracle_mask_finds_both_boxes() {
        let spec = two_box_scene();
        let frame = render_frame(&spec, &world_at(&spec, 0.0), 0);
        let pose = Isometry3::identity();
        let obs = segment_image_frame(
            &frame,
            &spec.camera,
            &calib(&spec),
            &pose,
            &SegmentationMode::OracleMask { labels: spec.label_map() },
            None,
        )
        .unwrap();
        assert_eq!(obs.len(), 2);
        assert_eq!(obs[0].true_id, Some(1));
        assert_eq!(obs[0].label, "crate");
        assert_eq!(obs[1].true_id, Some(2));
        // World AABB should straddle the true body center.
        assert!(obs[0].aabb_world.contains_point(&Vector3::new(3.95, 1.2, 0.0)));
    }

    #[test]
    fn empty_view_yields_no_observations() {
        let mut spec = two_box_scene();
        spec.bodies.clear();
        let frame = render_frame(&spec, &world_at(&spec, 0.0), 0);
        let obs = segment_image_frame(
            &frame,
            &spec.camera,
            &calib(&spec),
            &Isometry3::identity(),
            &SegmentationMode::OracleMask { labels: BTreeMap::new() },
            None,
        )
        .unwrap();
        assert!(obs.is_empty());
    }

    #[test]
    fn depth_cluster_matches_oracle_partition() {
        let spec = two_box_scene();
        let frame = render_frame(&spec, &world_at(&spec, 0.0), 0);
        let pose = Isometry3::identity();
        let clustered = segment_image_frame(
            &frame,
            &spec.camera,
            &calib(&spec),
            &pose,
            &SegmentationMode::DepthCluster { depth_gap: 0.2, min_pixels: 8 },
            None,
        )
        .unwrap();
        assert_eq!(clustered.len(), 2);
        let ids: Vec<_> = clustered.iter().filter_map(|o| o.true_id).collect();
        assert_eq!(ids, vec![1, 2]);
        assert!(clustered.iter().all(|o| o.label == "object"));
        assert!(clustered.iter().all(|o| o.confidence > 0.0 && o.confidence < 1.0));
    }

    #[test]
    fn query_gate_drops_mismatched_objects() {
        let spec = two_box_scene();
        let frame = render_frame(&spec, &world_at(&spec, 0.0), 0);
        let gate = QueryGate {
            embedding: encode_descriptor(&[], &[], Some("crate")).unwrap(),
            min_cosine: 0.3,
        };
        let obs = segment_image_frame(
            &frame,
            &spec.camera,
            &calib(&spec),
            &Isometry3::identity(),
            &SegmentationMode::OracleMask { labels: spec.label_map() },
            Some(&gate),
        )
        .unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].label, "crate");
    }
}
