//! Cross-modal fusion of image-branch and point-cloud-branch detections.
//!
//! Greedy highest-IoU-first merging; both input lists must already be
//! expressed in the world frame (the segmenters apply the calibration).

use nalgebra::Vector3;

use super::observation::{ObjectObservation, ObservationSource};
use crate::geom::{iou3d_padded, normalize_in_place};

#[derive(Debug, Clone)]
pub struct FusionParams {
    /// Pairs at or above this IoU merge (threshold inclusive).
    pub iou_threshold: f64,
    /// Padding applied before IoU, so flat single-face boxes still overlap.
    pub aabb_pad: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self { iou_threshold: 0.3, aabb_pad: 0.02 }
    }
}

/// Merge image and point-cloud observations; unmerged ones pass through.
pub fn fuse_observations(
    obs_image: &[ObjectObservation],
    obs_cloud: &[ObjectObservation],
    params: &FusionParams,
) -> Vec<ObjectObservation> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in obs_image.iter().enumerate() {
        for (j, b) in obs_cloud.iter().enumerate() {
            let iou = iou3d_padded(&a.aabb_world, &b.aabb_world, params.aabb_pad);
            if iou >= params.iou_threshold {
                candidates.push((iou, i, j));
            }
        }
    }
    // Highest IoU first; ties by (image index, cloud index).
    candidates.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap()
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    });

    let mut image_used = vec![false; obs_image.len()];
    let mut cloud_used = vec![false; obs_cloud.len()];
    let mut out = Vec::new();
    for (_, i, j) in candidates {
        if image_used[i] || cloud_used[j] {
            continue;
        }
        image_used[i] = true;
        cloud_used[j] = true;
        out.push(merge(&obs_image[i], &obs_cloud[j]));
    }
    for (i, o) in obs_image.iter().enumerate() {
        if !image_used[i] {
            out.push(o.clone());
        }
    }
    for (j, o) in obs_cloud.iter().enumerate() {
        if !cloud_used[j] {
            out.push(o.clone());
        }
    }
    out
}

fn merge(img: &ObjectObservation, cloud: &ObjectObservation) -> ObjectObservation {
    let mut embedding: Vec<f64> = img
        .embedding
        .iter()
        .zip(&cloud.embedding)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    normalize_in_place(&mut embedding);
    let label = if !img.label.is_empty() {
        img.label.clone()
    } else {
        cloud.label.clone()
    };
    ObjectObservation {
        source: ObservationSource::Fused,
        aabb_world: img.aabb_world.union(&cloud.aabb_world),
        centroid: Vector3::from((img.centroid + cloud.centroid) / 2.0),
        mask_pixels: img.mask_pixels.clone(),
        point_indices: cloud.point_indices.clone(),
        label,
        embedding,
        confidence: img.confidence.max(cloud.confidence),
        true_id: img.true_id.or(cloud.true_id),
    }
}
