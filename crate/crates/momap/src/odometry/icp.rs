//! Point-to-point ICP with grid-hash nearest neighbors and a closed-form
//! quaternion (Horn) rigid solve per iteration.

use std::collections::HashMap;

use nalgebra::{
    Isometry3, Matrix3, Matrix4, Point3, Translation3, UnitQuaternion, Vector3,
};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IcpError {
    #[error("registration requires two non-empty clouds")]
    EmptyCloud,
    #[error("degenerate correspondence set ({found} pairs, need at least 3)")]
    Degenerate { found: usize },
}

#[derive(Debug, Clone)]
pub struct RegistrationParams {
    pub max_iterations: usize,
    /// Stop when the RMSE improvement falls below this.
    pub convergence_delta_rmse: f64,
    /// Nearest-neighbor pairing radius, meters.
    pub nn_radius: f64,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            convergence_delta_rmse: 1e-6,
            nn_radius: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegistrationResult {
    /// Transform mapping `src` coordinates into the `dst` frame.
    pub transform: Isometry3<f64>,
    /// Fraction of source points with a destination neighbor within
    /// twice the pairing radius after convergence.
    pub fitness: f64,
    pub rmse: f64,
    pub iterations: usize,
}

/// Uniform-cell hash over the destination cloud for radius queries.
struct GridIndex<'a> {
    cell: f64,
    points: &'a [Vector3<f64>],
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl<'a> GridIndex<'a> {
    fn build(points: &'a [Vector3<f64>], cell: f64) -> Self {
        let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, points, cells }
    }

    fn key(p: &Vector3<f64>, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    fn nearest_within(&self, q: &Vector3<f64>, radius: f64) -> Option<(usize, f64)> {
        let r2 = radius * radius;
        let reach = (radius / self.cell).ceil() as i64;
        let (cx, cy, cz) = Self::key(q, self.cell);
        let mut best: Option<(usize, f64)> = None;
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    let Some(bucket) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &i in bucket {
                        let d2 = (self.points[i] - q).norm_squared();
                        if d2 <= r2 && best.map_or(true, |(_, b)| d2 < b) {
                            best = Some((i, d2));
                        }
                    }
                }
            }
        }
        best.map(|(i, d2)| (i, d2.sqrt()))
    }
}

/// Closed-form rigid fit (rotation via the largest eigenvector of Horn's
/// 4x4 quaternion matrix) mapping `src[i]` onto `dst[i]`.
fn horn_fit(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Isometry3<f64> {
    debug_assert_eq!(src.len(), dst.len());
    let n = src.len() as f64;
    let c_src = src.iter().sum::<Vector3<f64>>() / n;
    let c_dst = dst.iter().sum::<Vector3<f64>>() / n;

    let mut cov = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        cov += (s - c_src) * (d - c_dst).transpose();
    }

    let (sxx, sxy, sxz) = (cov[(0, 0)], cov[(0, 1)], cov[(0, 2)]);
    let (syx, syy, syz) = (cov[(1, 0)], cov[(1, 1)], cov[(1, 2)]);
    let (szx, szy, szz) = (cov[(2, 0)], cov[(2, 1)], cov[(2, 2)]);
    let q_mat = Matrix4::new(
        sxx + syy + szz, syz - szy,       szx - sxz,       sxy - syx,
        syz - szy,       sxx - syy - szz, sxy + syx,       szx + sxz,
        szx - sxz,       sxy + syx,       syy - sxx - szz, syz + szy,
        sxy - syx,       szx + sxz,       syz + szy,       szz - sxx - syy,
    );
    let eigen = nalgebra::SymmetricEigen::new(q_mat);
    let mut best = 0;
    for i in 1..4 {
        if eigen.eigenvalues[i] > eigen.eigenvalues[best] {
            best = i;
        }
    }
    let v = eigen.eigenvectors.column(best);
    let rotation = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
        v[0], v[1], v[2], v[3],
    ));
    let translation = c_dst - rotation * c_src;
    Isometry3::from_parts(Translation3::from(translation), rotation)
}

/// Register `src` onto `dst` starting from `init`.
pub fn register_scans(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
    init: &Isometry3<f64>,
    params: &RegistrationParams,
) -> Result<RegistrationResult, IcpError> {
    if src.is_empty() || dst.is_empty() {
        return Err(IcpError::EmptyCloud);
    }
    let index = GridIndex::build(dst, params.nn_radius.max(1e-6));

    let mut transform = *init;
    let mut last_rmse = f64::INFINITY;
    let mut iterations = 0;
    for iter in 0..params.max_iterations {
        iterations = iter + 1;
        let mut pairs_src = Vec::new();
        let mut pairs_dst = Vec::new();
        let mut sq_sum = 0.0;
        for s in src {
            let moved = (transform * Point3::from(*s)).coords;
            if let Some((j, dist)) = index.nearest_within(&moved, params.nn_radius) {
                pairs_src.push(*s);
                pairs_dst.push(dst[j]);
                sq_sum += dist * dist;
            }
        }
        if pairs_src.len() < 3 {
            return Err(IcpError::Degenerate { found: pairs_src.len() });
        }
        let rmse = (sq_sum / pairs_src.len() as f64).sqrt();
        transform = horn_fit(&pairs_src, &pairs_dst);
        if (last_rmse - rmse).abs() < params.convergence_delta_rmse {
            last_rmse = rmse;
            break;
        }
        last_rmse = rmse;
    }

    // Final alignment quality under the converged transform.
    let inlier_radius = 2.0 * params.nn_radius;
    let mut inliers = 0usize;
    let mut sq_sum = 0.0;
    let mut matched = 0usize;
    for s in src {
        let moved = (transform * Point3::from(*s)).coords;
        if let Some((_, dist)) = index.nearest_within(&moved, inlier_radius) {
            matched += 1;
            sq_sum += dist * dist;
            if dist <= inlier_radius {
                inliers += 1;
            }
        }
    }
    let rmse = if matched > 0 { (sq_sum / matched as f64).sqrt() } else { f64::INFINITY };
    Ok(RegistrationResult {
        transform,
        fitness: inliers as f64 / src.len() as f64,
        rmse,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Points on three faces of a box: enough structure to pin all 6 DoF.
    pub fn structured_cloud() -> Vec<Vector3<f64>> {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                let (a, b) = (i as f64 * 0.4 - 2.0, j as f64 * 0.4 - 2.0);
                pts.push(Vector3::new(a, b, -1.0)); // floor
                pts.push(Vector3::new(a, 2.0, b)); // wall y = 2
                pts.push(Vector3::new(2.0, a, b)); // wall x = 2
            }
        }
        pts
    }

    #[test]
    fn self_registration_is_identity() {
        let cloud = structured_cloud();
        let result =
            register_scans(&cloud, &cloud, &Isometry3::identity(), &RegistrationParams::default())
                .unwrap();
        assert!(result.transform.translation.vector.norm() < 1e-9);
        assert!(result.transform.rotation.angle() < 1e-9);
        assert!(result.rmse < 1e-9);
        assert!((result.fitness - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_unit_translation() {
        let src = structured_cloud();
        let shift = Vector3::new(1.0, 0.0, 0.0);
        let dst: Vec<_> = src.iter().map(|p| p + shift).collect();
        let result =
            register_scans(&src, &dst, &Isometry3::identity(), &RegistrationParams {
                nn_radius: 1.5,
                ..Default::default()
            })
            .unwrap();
        assert!((result.transform.translation.vector - shift).norm() < 1e-3);
        assert!(result.transform.rotation.angle() < 1e-3);
    }

    #[test]
    fn two_points_is_degenerate() {
        let src = vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0)];
        let dst = src.clone();
        let err = register_scans(&src, &dst, &Isometry3::identity(), &RegistrationParams::default())
            .unwrap_err();
        assert!(matches!(err, IcpError::Degenerate { found: 2 }));
    }

    #[test]
    fn empty_cloud_is_an_error() {
        let cloud = structured_cloud();
        assert_eq!(
            register_scans(&[], &cloud, &Isometry3::identity(), &RegistrationParams::default())
                .unwrap_err(),
            IcpError::EmptyCloud
        );
    }

    #[test]
    fn recovers_random_small_rigid_motions() {
        // 100 random perturbations up to 0.3 m translation and 5 degrees.
        let src = structured_cloud();
        let mut rng = crate::rng::stream(3, "icp_trials", 0);
        for trial in 0..100 {
            let axis = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize();
            let angle = rng.random_range(0.0..5.0f64).to_radians();
            let t = Vector3::new(
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
            );
            let truth = Isometry3::from_parts(
                Translation3::from(t),
                UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle),
            );
            let dst: Vec<_> = src.iter().map(|p| (truth * Point3::from(*p)).coords).collect();
            let result = register_scans(
                &src,
                &dst,
                &Isometry3::identity(),
                &RegistrationParams { nn_radius: 1.0, ..Default::default() },
            )
            .unwrap();
            let t_err = (result.transform.translation.vector - truth.translation.vector).norm();
            let r_err = result.transform.rotation.angle_to(&truth.rotation).to_degrees();
            assert!(t_err <= 1e-3, "trial {trial}: translation error {t_err}");
            assert!(r_err <= 0.1, "trial {trial}: rotation error {r_err} deg");
        }
    }
}
