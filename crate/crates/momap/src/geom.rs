//! Shared geometry: SE(3) helpers, axis-aligned boxes, and the pose
//! serialization format used by every on-disk artifact.

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Serialized rigid transform: position plus unit quaternion `[w, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseDto {
    pub p: [f64; 3],
    #[serde(default = "identity_quat")]
    pub q: [f64; 4],
}

fn identity_quat() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

impl PoseDto {
    pub fn identity() -> Self {
        Self { p: [0.0; 3], q: [1.0, 0.0, 0.0, 0.0] }
    }
}

impl From<&Isometry3<f64>> for PoseDto {
    fn from(iso: &Isometry3<f64>) -> Self {
        let t = iso.translation.vector;
        let q = iso.rotation.quaternion();
        Self { p: [t.x, t.y, t.z], q: [q.w, q.i, q.j, q.k] }
    }
}

impl From<&PoseDto> for Isometry3<f64> {
    fn from(dto: &PoseDto) -> Self {
        let q = nalgebra::Quaternion::new(dto.q[0], dto.q[1], dto.q[2], dto.q[3]);
        Isometry3::from_parts(
            Translation3::new(dto.p[0], dto.p[1], dto.p[2]),
            UnitQuaternion::from_quaternion(q),
        )
    }
}

pub fn pose_to_dto(iso: &Isometry3<f64>) -> PoseDto {
    iso.into()
}

pub fn pose_from_dto(dto: &PoseDto) -> Isometry3<f64> {
    dto.into()
}

/// Interpolate between two poses: linear in translation, slerp in rotation.
/// `s` is clamped to `[0, 1]`.
pub fn interpolate_pose(a: &Isometry3<f64>, b: &Isometry3<f64>, s: f64) -> Isometry3<f64> {
    let s = s.clamp(0.0, 1.0);
    let t = a.translation.vector.lerp(&b.translation.vector, s);
    let q = a
        .rotation
        .try_slerp(&b.rotation, s, 1e-9)
        .unwrap_or_else(|| if s < 0.5 { a.rotation } else { b.rotation });
    Isometry3::from_parts(Translation3::from(t), q)
}

/// Rotation angle between two poses, in radians.
pub fn rotation_angle_between(a: &Isometry3<f64>, b: &Isometry3<f64>) -> f64 {
    a.rotation.angle_to(&b.rotation)
}

/// Axis-aligned box in some frame, `min ≤ max` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        debug_assert!((0..3).all(|i| min[i] <= max[i]));
        Self { min, max }
    }

    /// Smallest box containing all points. `None` for an empty slice.
    pub fn from_points<'a, I: IntoIterator<Item = &'a Vector3<f64>>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut min = [first.x, first.y, first.z];
        let mut max = min;
        for p in it {
            let c = [p.x, p.y, p.z];
            for i in 0..3 {
                min[i] = min[i].min(c[i]);
                max[i] = max[i].max(c[i]);
            }
        }
        Some(Self { min, max })
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }

    pub fn extents(&self) -> [f64; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn volume(&self) -> f64 {
        let e = self.extents();
        e[0] * e[1] * e[2]
    }

    pub fn translated(&self, d: &Vector3<f64>) -> Self {
        Self {
            min: [self.min[0] + d.x, self.min[1] + d.y, self.min[2] + d.z],
            max: [self.max[0] + d.x, self.max[1] + d.y, self.max[2] + d.z],
        }
    }

    /// Box grown by `pad` on every side.
    pub fn inflated(&self, pad: f64) -> Self {
        Self {
            min: [self.min[0] - pad, self.min[1] - pad, self.min[2] - pad],
            max: [self.max[0] + pad, self.max[1] + pad, self.max[2] + pad],
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            min: [
                self.min[0].min(other.min[0]),
                self.min[1].min(other.min[1]),
                self.min[2].min(other.min[2]),
            ],
            max: [
                self.max[0].max(other.max[0]),
                self.max[1].max(other.max[1]),
                self.max[2].max(other.max[2]),
            ],
        }
    }

    pub fn intersection_volume(&self, other: &Self) -> f64 {
        let mut v = 1.0;
        for i in 0..3 {
            let lo = self.min[i].max(other.min[i]);
            let hi = self.max[i].min(other.max[i]);
            if hi <= lo {
                return 0.0;
            }
            v *= hi - lo;
        }
        v
    }

    /// Closed-set overlap test (shared faces count as touching).
    pub fn touches(&self, other: &Self) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    /// `self ⊆ other`.
    pub fn contained_in(&self, other: &Self) -> bool {
        (0..3).all(|i| self.min[i] >= other.min[i] && self.max[i] <= other.max[i])
    }

    /// Overlap area of the two boxes projected on the XY plane.
    pub fn overlap_area_xy(&self, other: &Self) -> f64 {
        let mut a = 1.0;
        for i in 0..2 {
            let lo = self.min[i].max(other.min[i]);
            let hi = self.max[i].min(other.max[i]);
            if hi <= lo {
                return 0.0;
            }
            a *= hi - lo;
        }
        a
    }

    pub fn contains_point(&self, p: &Vector3<f64>) -> bool {
        let c = [p.x, p.y, p.z];
        (0..3).all(|i| c[i] >= self.min[i] && c[i] <= self.max[i])
    }
}

/// Intersection-over-union of two boxes. Zero-volume inputs give 0.
pub fn iou3d(a: &Aabb, b: &Aabb) -> f64 {
    let inter = a.intersection_volume(b);
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// IoU with both boxes inflated by `pad`. Observed boxes are often flat
/// (single visible face), which makes plain volume IoU collapse to 0/0.
pub fn iou3d_padded(a: &Aabb, b: &Aabb, pad: f64) -> f64 {
    iou3d(&a.inflated(pad), &b.inflated(pad))
}

/// World-frame AABB of a box with half-extents `half`, posed by `world_from_body`.
pub fn obb_world_aabb(world_from_body: &Isometry3<f64>, half: &Vector3<f64>) -> Aabb {
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                let corner =
                    world_from_body * Point3::new(sx * half.x, sy * half.y, sz * half.z);
                let c = [corner.x, corner.y, corner.z];
                for i in 0..3 {
                    min[i] = min[i].min(c[i]);
                    max[i] = max[i].max(c[i]);
                }
            }
        }
    }
    Aabb { min, max }
}

/// Cosine similarity; 0 when either vector is all-zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na <= 0.0 || nb <= 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Normalize `v` to unit length in place; leaves an all-zero vector untouched.
pub fn normalize_in_place(v: &mut [f64]) {
    let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_dto_round_trip() {
        let iso = Isometry3::from_parts(
            Translation3::new(1.0, -2.0, 3.5),
            UnitQuaternion::from_euler_angles(0.1, -0.4, 2.0),
        );
        let dto = pose_to_dto(&iso);
        let back = pose_from_dto(&dto);
        assert!((iso.translation.vector - back.translation.vector).norm() < 1e-12);
        assert!(iso.rotation.angle_to(&back.rotation) < 1e-12);
    }

    #[test]
    fn iou_identical_boxes_is_one() {
        let a = Aabb::new([0.0, 0.0, 0.0], [1.0, 2.0, 3.0]);
        assert!((iou3d(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iou_disjoint_boxes_is_zero() {
        let a = Aabb::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        let b = Aabb::new([5.0, 0.0, 0.0], [6.0, 1.0, 1.0]);
        assert_eq!(iou3d(&a, &b), 0.0);
    }

    #[test]
    fn padded_iou_handles_flat_boxes() {
        let flat = Aabb::new([0.0, 0.0, 0.0], [1.0, 1.0, 0.0]);
        assert_eq!(iou3d(&flat, &flat), 0.0);
        assert!((iou3d_padded(&flat, &flat, 0.02) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn obb_aabb_covers_rotated_box() {
        let pose = Isometry3::from_parts(
            Translation3::new(0.0, 0.0, 0.0),
            UnitQuaternion::from_euler_angles(0.0, 0.0, std::f64::consts::FRAC_PI_4),
        );
        let aabb = obb_world_aabb(&pose, &Vector3::new(1.0, 1.0, 1.0));
        let expect = 2.0f64.sqrt();
        assert!((aabb.max[0] - expect).abs() < 1e-12);
        assert!((aabb.max[1] - expect).abs() < 1e-12);
        assert!((aabb.max[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_endpoints() {
        let a = Isometry3::translation(0.0, 0.0, 0.0);
        let b = Isometry3::from_parts(
            Translation3::new(2.0, 0.0, 0.0),
            UnitQuaternion::from_euler_angles(0.0, 0.0, 1.0),
        );
        let mid = interpolate_pose(&a, &b, 0.5);
        assert!((mid.translation.vector.x - 1.0).abs() < 1e-12);
        assert!((mid.rotation.angle() - 0.5).abs() < 1e-9);
        assert!(interpolate_pose(&a, &b, -1.0).translation.vector.norm() < 1e-12);
    }
}
