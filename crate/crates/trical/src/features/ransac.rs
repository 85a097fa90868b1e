//! RANSAC plane fitting for drivable-area segmentation.

use crate::geometry::{cross, dot, norm, sub, Vec3};
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

use super::FeatureError;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RansacParams {
    pub inlier_thresh: f64,
    pub iterations: usize,
    /// Below this best-hypothesis inlier fraction the fit fails (no drivable
    /// area in view).
    pub min_inlier_fraction: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            inlier_thresh: 0.15,
            iterations: 200,
            min_inlier_fraction: 0.30,
            seed: 0,
        }
    }
}

/// Plane n . p = offset with unit normal oriented toward +z.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlaneFit {
    pub normal: Vec3,
    pub offset: f64,
    pub inliers: Vec<usize>,
}

impl PlaneFit {
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        dot(self.normal, p) - self.offset
    }
}

pub fn ransac_ground_plane(
    points: &[[f64; 3]],
    params: &RansacParams,
) -> Result<PlaneFit, FeatureError> {
    if points.len() < 3 {
        return Err(FeatureError::DegenerateInput(
            "plane fit needs at least 3 points".into(),
        ));
    }
    assert!(params.inlier_thresh > 0.0);
    let mut rng = Rng::stream(params.seed, &[0x52414E53]);
    let mut best: Option<(usize, Vec3, f64)> = None;
    for _ in 0..params.iterations {
        let a = points[rng.next_index(points.len())];
        let b = points[rng.next_index(points.len())];
        let c = points[rng.next_index(points.len())];
        let n = cross(sub(b, a), sub(c, a));
        let len = norm(n);
        if len < 1e-12 {
            continue; // collinear sample
        }
        let n = [n[0] / len, n[1] / len, n[2] / len];
        let offset = dot(n, a);
        let count = points
            .iter()
            .filter(|p| (dot(n, **p) - offset).abs() <= params.inlier_thresh)
            .count();
        if best.as_ref().map_or(true, |(c0, _, _)| count > *c0) {
            best = Some((count, n, offset));
        }
    }
    let (count, n0, off0) = best.ok_or_else(|| {
        FeatureError::DegenerateInput("all RANSAC samples were collinear".into())
    })?;
    let fraction = count as f64 / points.len() as f64;
    if fraction < params.min_inlier_fraction {
        return Err(FeatureError::NoDrivableArea { best_fraction: fraction });
    }

    // Least-squares refit on the hypothesis inliers: plane through the
    // centroid, normal = smallest-eigenvalue direction of the covariance.
    let hyp_inliers: Vec<usize> = (0..points.len())
        .filter(|&i| (dot(n0, points[i]) - off0).abs() <= params.inlier_thresh)
        .collect();
    let m = hyp_inliers.len() as f64;
    let mut centroid = [0.0; 3];
    for &i in &hyp_inliers {
        centroid = crate::geometry::add(centroid, points[i]);
    }
    centroid = crate::geometry::scale(centroid, 1.0 / m);
    let mut cov = [[0.0f64; 3]; 3];
    for &i in &hyp_inliers {
        let d = sub(points[i], centroid);
        for r in 0..3 {
            for c in 0..3 {
                cov[r][c] += d[r] * d[c];
            }
        }
    }
    let mut normal = smallest_eigenvector(cov);
    if normal[2] < 0.0 {
        normal = [-normal[0], -normal[1], -normal[2]];
    }
    let offset = dot(normal, centroid);
    let plane = PlaneFit { normal, offset, inliers: Vec::new() };
    let inliers: Vec<usize> = (0..points.len())
        .filter(|&i| plane.signed_distance(points[i]).abs() <= params.inlier_thresh)
        .collect();
    Ok(PlaneFit { normal, offset, inliers })
}

/// Smallest-eigenvalue eigenvector of a symmetric 3x3 matrix via cyclic
/// Jacobi rotations.
fn smallest_eigenvector(mut a: [[f64; 3]; 3]) -> Vec3 {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..32 {
        // Largest off-diagonal element.
        let (mut p, mut q, mut max) = (0, 1, a[0][1].abs());
        for (i, j) in [(0usize, 2usize), (1, 2)] {
            if a[i][j].abs() > max {
                max = a[i][j].abs();
                p = i;
                q = j;
            }
        }
        if max < 1e-14 {
            break;
        }
        let theta = 0.5 * (2.0 * a[p][q]).atan2(a[q][q] - a[p][p]);
        let (s, c) = theta.sin_cos();
        let mut rot = [[0.0; 3]; 3];
        for (i, row) in rot.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        rot[p][p] = c;
        rot[q][q] = c;
        rot[p][q] = s;
        rot[q][p] = -s;
        // a = rot^T a rot; v = v rot
        let mut tmp = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                tmp[i][j] = (0..3).map(|k| rot[k][i] * a[k][j]).sum();
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = (0..3).map(|k| tmp[i][k] * rot[k][j]).sum();
            }
        }
        let mut vn = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                vn[i][j] = (0..3).map(|k| v[i][k] * rot[k][j]).sum();
            }
        }
        v = vn;
    }
    let mut min_idx = 0;
    for i in 1..3 {
        if a[i][i] < a[min_idx][min_idx] {
            min_idx = i;
        }
    }
    let col = [v[0][min_idx], v[1][min_idx], v[2][min_idx]];
    crate::geometry::normalize(col)
}
