//! Point-cloud object recognition: ground removal plus grid-hash
//! Euclidean clustering, with optional pose-compensated accumulation of
//! the last K scans.

use std::collections::{BTreeMap, HashMap, VecDeque};

use nalgebra::{Isometry3, Point3, Vector3};

use super::descriptor::encode_descriptor;
use super::observation::{ObjectObservation, ObservationSource};
use crate::geom::Aabb;
use crate::sim::LidarPoint;

#[derive(Debug, Clone)]
pub struct CloudSegmenterParams {
    /// Scans accumulated into the clustering frame (1 = current only).
    pub accumulate_scans: usize,
    /// Points below this height are treated as ground and discarded.
    pub ground_z: f64,
    /// Euclidean clustering radius.
    pub cluster_radius: f64,
    /// Clusters smaller than this are noise.
    pub min_cluster_points: usize,
}

impl Default for CloudSegmenterParams {
    fn default() -> Self {
        Self {
            accumulate_scans: 1,
            ground_z: -10.0,
            cluster_radius: 0.6,
            min_cluster_points: 5,
        }
    }
}

struct StoredPoint {
    pos: Vector3<f64>,
    color: [f32; 3],
    body_id: u32,
    /// Index into the current scan; `None` for accumulated history points.
    scan_index: Option<usize>,
}

/// Stateful segmenter; keeps the scan history needed for accumulation.
pub struct CloudSegmenter {
    pub params: CloudSegmenterParams,
    history: VecDeque<Vec<StoredPoint>>,
}

impl CloudSegmenter {
    pub fn new(params: CloudSegmenterParams) -> Self {
        Self { params, history: VecDeque::new() }
    }

    /// Segment one scan given in the sensor frame. With `world_from_lidar`
    /// present, clustering happens in the world frame and the previous
    /// `accumulate_scans - 1` scans are folded in.
    pub fn segment(
        &mut self,
        pcl: &[LidarPoint],
        world_from_lidar: Option<&Isometry3<f64>>,
    ) -> Vec<ObjectObservation> {
        let transform = world_from_lidar.copied().unwrap_or_else(Isometry3::identity);
        let current: Vec<StoredPoint> = pcl
            .iter()
            .enumerate()
            .map(|(i, p)| StoredPoint {
                pos: (transform * Point3::from(p.pos)).coords,
                color: p.color,
                body_id: p.body_id,
                scan_index: Some(i),
            })
            .collect();

        let mut working: Vec<&StoredPoint> = Vec::new();
        if world_from_lidar.is_some() && self.params.accumulate_scans > 1 {
            for scan in &self.history {
                working.extend(scan.iter());
            }
        }
        working.extend(current.iter());

        let obs = cluster_points(&working, &self.params);

        if world_from_lidar.is_some() && self.params.accumulate_scans > 1 {
            let aged: Vec<StoredPoint> = current
                .into_iter()
                .map(|mut p| {
                    p.scan_index = None;
                    p
                })
                .collect();
            self.history.push_back(aged);
            while self.history.len() >= self.params.accumulate_scans {
                self.history.pop_front();
            }
        }
        obs
    }
}

/// Stateless single-scan variant.
pub fn segment_point_cloud(
    pcl: &[LidarPoint],
    world_from_lidar: Option<&Isometry3<f64>>,
    params: &CloudSegmenterParams,
) -> Vec<ObjectObservation> {
    let mut one_shot = CloudSegmenter::new(CloudSegmenterParams {
        accumulate_scans: 1,
        ..params.clone()
    });
    one_shot.segment(pcl, world_from_lidar)
}

fn cell_of(p: &Vector3<f64>, size: f64) -> (i64, i64, i64) {
    (
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    )
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }
    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn cluster_points(points: &[&StoredPoint], params: &CloudSegmenterParams) -> Vec<ObjectObservation> {
    let kept: Vec<(usize, &StoredPoint)> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.pos.z >= params.ground_z)
        .map(|(i, p)| (i, *p))
        .collect();
    if kept.is_empty() {
        return Vec::new();
    }

    let eps = params.cluster_radius;
    let eps2 = eps * eps;
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (ki, (_, p)) in kept.iter().enumerate() {
        grid.entry(cell_of(&p.pos, eps)).or_default().push(ki);
    }

    let mut dsu = DisjointSet::new(kept.len());
    for (ki, (_, p)) in kept.iter().enumerate() {
        let (cx, cy, cz) = cell_of(&p.pos, eps);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(neighbors) = grid.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &kj in neighbors {
                        if kj <= ki {
                            continue;
                        }
                        if (kept[kj].1.pos - p.pos).norm_squared() <= eps2 {
                            dsu.union(ki, kj);
                        }
                    }
                }
            }
        }
    }

    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for ki in 0..kept.len() {
        let root = dsu.find(ki);
        clusters.entry(root).or_default().push(ki);
    }

    let mut out = Vec::new();
    for members in clusters.into_values() {
        if members.len() < params.min_cluster_points {
            continue;
        }
        let pts: Vec<Vector3<f64>> = members.iter().map(|&ki| kept[ki].1.pos).collect();
        let colors: Vec<[f32; 3]> = members.iter().map(|&ki| kept[ki].1.color).collect();
        let point_indices: Vec<usize> =
            members.iter().filter_map(|&ki| kept[ki].1.scan_index).collect();
        let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
        for &ki in &members {
            *votes.entry(kept[ki].1.body_id).or_insert(0) += 1;
        }
        let true_id = votes
            .iter()
            .max_by_key(|(id, n)| (**n, std::cmp::Reverse(**id)))
            .map(|(id, _)| *id);
        let Ok(embedding) = encode_descriptor(&pts, &colors, None) else {
            continue;
        };
        let centroid = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
        let n = members.len() as f64;
        out.push(ObjectObservation {
            source: ObservationSource::PointCloud,
            aabb_world: Aabb::from_points(pts.iter()).expect("non-empty cluster"),
            centroid,
            mask_pixels: None,
            point_indices: Some(point_indices),
            label: String::new(),
            embedding,
            confidence: n / (n + 50.0),
            true_id,
        });
    }
    // Deterministic order: majority id then size.
    out.sort_by_key(|o| {
        (o.true_id.unwrap_or(u32::MAX), o.point_indices.as_ref().map_or(0, |p| p.len()))
    });
    out
}
