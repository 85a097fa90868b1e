//! Feature extraction: builds the per-frame feature set feeding the losses.
//!
//! Lidar clouds are uniformly sampled, split into ground (RANSAC plane
//! inliers, the drivable area) and object clusters (DBSCAN); radar detections
//! are clustered and tracked over frames to isolate dynamic road users;
//! camera semantics come from the frame's oracle raster.

pub mod dbscan;
pub mod mask;
pub mod ransac;
pub mod sampling;
pub mod tracker;

pub use dbscan::{dbscan, dbscan_bruteforce, DbscanParams, Label};
pub use mask::{BitMask2d, DistanceField};
pub use ransac::{ransac_ground_plane, PlaneFit, RansacParams};
pub use sampling::uniform_sample;
pub use tracker::{RadarClusterFeature, RadarTracker, TrackedCluster, TrackerParams};

use crate::geometry::Vec3;
use crate::losses::BevGrid;
use crate::simworld::{FrameBundle, LidarPoint, PixelClass, RoadUserDetection, NUM_PIXEL_CLASSES};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default uniform-sampling target for lidar clouds.
pub const DEFAULT_SAMPLE_TARGET: usize = 8_000;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no drivable area in view (best plane inlier fraction {best_fraction:.2})")]
    NoDrivableArea { best_fraction: f64 },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub sample_target: usize,
    pub lidar_dbscan: DbscanParams,
    pub radar_dbscan: DbscanParams,
    pub ransac: RansacParams,
    pub tracker: TrackerParams,
    /// Residual centroid motion (after ego-flow compensation) above which a
    /// lidar cluster is flagged dynamic (m).
    pub lidar_dynamic_thresh: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            sample_target: DEFAULT_SAMPLE_TARGET,
            lidar_dbscan: DbscanParams { eps: 0.8, min_pts: 5 },
            radar_dbscan: DbscanParams { eps: 1.5, min_pts: 2 },
            ransac: RansacParams::default(),
            tracker: TrackerParams::default(),
            lidar_dynamic_thresh: 0.3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CameraFeatures {
    /// Fraction of pixels per class; sums to 1.
    pub class_fractions: [f64; NUM_PIXEL_CLASSES],
    pub road_users: Vec<RoadUserDetection>,
    pub reflective_mask: BitMask2d,
    pub sky_mask: BitMask2d,
    pub drivable_mask: BitMask2d,
    /// Distance field to the nearest reflective pixel.
    pub reflective_dist: DistanceField,
}

impl CameraFeatures {
    pub fn sky_fraction(&self) -> f64 {
        self.class_fractions[PixelClass::Sky as usize]
    }

    pub fn drivable_fraction(&self) -> f64 {
        self.class_fractions[PixelClass::Drivable as usize]
    }
}

#[derive(Clone, Debug)]
pub struct LidarCluster {
    /// Indices into `LidarFeatures::sampled`.
    pub members: Vec<usize>,
    pub centroid: Vec3,
    pub bbox_min: Vec3,
    pub bbox_max: Vec3,
    pub dynamic: bool,
}

#[derive(Clone, Debug)]
pub struct DrivableArea {
    pub plane: PlaneFit,
    /// Ground inlier positions, lidar frame.
    pub points: Vec<Vec3>,
    /// Inlier occupancy on the standard BEV grid, lidar frame.
    pub bev: BevGrid,
}

#[derive(Clone, Debug)]
pub struct LidarFeatures {
    pub sampled: Vec<LidarPoint>,
    pub clusters: Vec<LidarCluster>,
    /// `None` when RANSAC found no ground plane; the lidar-radar IoU term is
    /// then absent, never zero.
    pub drivable: Option<DrivableArea>,
}

#[derive(Clone, Debug)]
pub struct RadarFeatures {
    /// Cartesian positions of every detection, radar frame.
    pub points: Vec<Vec3>,
    pub clusters: Vec<RadarClusterFeature>,
    pub tracked: Vec<TrackedCluster>,
    pub bev_drivable: BevGrid,
    /// Occupied cell centers of `bev_drivable`, cached for loss evaluation.
    pub bev_centers: Vec<[f64; 2]>,
}

/// The full feature set for one frame.
#[derive(Clone, Debug)]
pub struct FeatureSet {
    pub camera: CameraFeatures,
    pub lidar: LidarFeatures,
    pub radar: RadarFeatures,
}

/// Stateful extractor. The radar tracker (and the lidar dynamic-flag history)
/// must see one drive's frames in order; distinct drives use distinct
/// extractors.
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    ego_velocity: f64,
    tracker: RadarTracker,
    prev_lidar_centroids: Vec<Vec3>,
}

impl FeatureExtractor {
    pub fn new(cfg: FeatureConfig, ego_velocity: f64) -> Self {
        let tracker = RadarTracker::new(cfg.tracker);
        FeatureExtractor { cfg, ego_velocity, tracker, prev_lidar_centroids: Vec::new() }
    }

    pub fn extract(&mut self, bundle: &FrameBundle) -> FeatureSet {
        let camera = self.extract_camera(bundle);
        let lidar = self.extract_lidar(bundle);
        let radar = self.extract_radar(bundle);
        FeatureSet { camera, lidar, radar }
    }

    fn extract_camera(&self, bundle: &FrameBundle) -> CameraFeatures {
        let raster = &bundle.camera.raster;
        let (w, h) = (raster.width, raster.height);
        let mut counts = [0usize; NUM_PIXEL_CLASSES];
        let mut reflective_mask = BitMask2d::new(w, h);
        let mut sky_mask = BitMask2d::new(w, h);
        let mut drivable_mask = BitMask2d::new(w, h);
        for y in 0..h {
            let row = &raster.data[y as usize * w as usize..(y as usize + 1) * w as usize];
            for (x, &b) in row.iter().enumerate() {
                let class = PixelClass::from_u8(b);
                counts[class as usize] += 1;
                if class.is_reflective() {
                    reflective_mask.set(x as u32, y);
                } else if class == PixelClass::Sky {
                    sky_mask.set(x as u32, y);
                } else if class == PixelClass::Drivable {
                    drivable_mask.set(x as u32, y);
                }
            }
        }
        let total = (w as usize * h as usize) as f64;
        let mut class_fractions = [0.0; NUM_PIXEL_CLASSES];
        for (f, c) in class_fractions.iter_mut().zip(counts) {
            *f = c as f64 / total;
        }
        let reflective_dist = DistanceField::from_mask(&reflective_mask);
        CameraFeatures {
            class_fractions,
            road_users: bundle.camera.detections.clone(),
            reflective_mask,
            sky_mask,
            drivable_mask,
            reflective_dist,
        }
    }

    fn extract_lidar(&mut self, bundle: &FrameBundle) -> LidarFeatures {
        let positions: Vec<Vec3> = bundle.lidar.points.iter().map(|p| p.pos).collect();
        let sel = uniform_sample(&positions, self.cfg.sample_target);
        let sampled: Vec<LidarPoint> = sel.iter().map(|&i| bundle.lidar.points[i]).collect();
        let sampled_pos: Vec<Vec3> = sampled.iter().map(|p| p.pos).collect();

        let drivable = match ransac_ground_plane(&sampled_pos, &self.cfg.ransac) {
            Ok(plane) => {
                let points: Vec<Vec3> = plane.inliers.iter().map(|&i| sampled_pos[i]).collect();
                let mut bev = BevGrid::standard();
                for p in &points {
                    bev.set_point(p[0], p[1]);
                }
                Some(DrivableArea { plane, points, bev })
            }
            Err(_) => None,
        };

        let inlier_flags = {
            let mut flags = vec![false; sampled.len()];
            if let Some(d) = &drivable {
                for &i in &d.plane.inliers {
                    flags[i] = true;
                }
            }
            flags
        };
        let object_idx: Vec<usize> =
            (0..sampled.len()).filter(|&i| !inlier_flags[i]).collect();
        let object_pos: Vec<Vec3> = object_idx.iter().map(|&i| sampled_pos[i]).collect();
        let labels = dbscan(&object_pos, &self.cfg.lidar_dbscan);
        let n_clusters = labels
            .iter()
            .filter_map(|l| match l {
                Label::Cluster(id) => Some(*id + 1),
                Label::Noise => None,
            })
            .max()
            .unwrap_or(0) as usize;
        let mut clusters: Vec<LidarCluster> = (0..n_clusters)
            .map(|_| LidarCluster {
                members: Vec::new(),
                centroid: [0.0; 3],
                bbox_min: [f64::INFINITY; 3],
                bbox_max: [f64::NEG_INFINITY; 3],
                dynamic: false,
            })
            .collect();
        for (k, label) in labels.iter().enumerate() {
            if let Label::Cluster(id) = label {
                let c = &mut clusters[*id as usize];
                let idx = object_idx[k];
                let p = sampled_pos[idx];
                c.members.push(idx);
                c.centroid = crate::geometry::add(c.centroid, p);
                for a in 0..3 {
                    c.bbox_min[a] = c.bbox_min[a].min(p[a]);
                    c.bbox_max[a] = c.bbox_max[a].max(p[a]);
                }
            }
        }
        for c in &mut clusters {
            c.centroid = crate::geometry::scale(c.centroid, 1.0 / c.members.len() as f64);
        }

        // Dynamic flags: nearest previous centroid within 2 m, ego flow taken
        // out via the componentwise median displacement.
        if !self.prev_lidar_centroids.is_empty() {
            let mut disps: Vec<(usize, Vec3)> = Vec::new();
            for (ci, c) in clusters.iter().enumerate() {
                let mut best: Option<(f64, Vec3)> = None;
                for prev in &self.prev_lidar_centroids {
                    let d = crate::geometry::sub(c.centroid, *prev);
                    let dist = crate::geometry::norm(d);
                    if dist <= 2.0 && best.as_ref().map_or(true, |(bd, _)| dist < *bd) {
                        best = Some((dist, d));
                    }
                }
                if let Some((_, d)) = best {
                    disps.push((ci, d));
                }
            }
            if disps.len() >= 2 {
                let median = |mut v: Vec<f64>| -> f64 {
                    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    v[v.len() / 2]
                };
                let flow = [
                    median(disps.iter().map(|(_, d)| d[0]).collect()),
                    median(disps.iter().map(|(_, d)| d[1]).collect()),
                    median(disps.iter().map(|(_, d)| d[2]).collect()),
                ];
                for (ci, d) in &disps {
                    let resid = crate::geometry::norm(crate::geometry::sub(*d, flow));
                    if resid > self.cfg.lidar_dynamic_thresh {
                        clusters[*ci].dynamic = true;
                    }
                }
            }
        }
        self.prev_lidar_centroids = clusters.iter().map(|c| c.centroid).collect();

        LidarFeatures { sampled, clusters, drivable }
    }

    fn extract_radar(&mut self, bundle: &FrameBundle) -> RadarFeatures {
        let points: Vec<Vec3> = bundle.radar.detections.iter().map(|d| d.cartesian()).collect();
        let labels = dbscan(&points, &self.cfg.radar_dbscan);
        let n_clusters = labels
            .iter()
            .filter_map(|l| match l {
                Label::Cluster(id) => Some(*id + 1),
                Label::Noise => None,
            })
            .max()
            .unwrap_or(0) as usize;
        let mut clusters: Vec<RadarClusterFeature> = (0..n_clusters)
            .map(|_| RadarClusterFeature {
                members: Vec::new(),
                center: [0.0; 3],
                mean_doppler: 0.0,
                mean_compensated_doppler: 0.0,
            })
            .collect();
        for (i, label) in labels.iter().enumerate() {
            if let Label::Cluster(id) = label {
                let c = &mut clusters[*id as usize];
                let det = &bundle.radar.detections[i];
                let p = points[i];
                // Ego compensation assumes the radar x axis points along the
                // ego motion direction (the rig's nominal mounting).
                let comp = det.doppler + self.ego_velocity * (p[0] / crate::geometry::norm(p));
                c.members.push(i);
                c.center = crate::geometry::add(c.center, p);
                c.mean_doppler += det.doppler;
                c.mean_compensated_doppler += comp;
            }
        }
        for c in &mut clusters {
            let n = c.members.len() as f64;
            c.center = crate::geometry::scale(c.center, 1.0 / n);
            c.mean_doppler /= n;
            c.mean_compensated_doppler /= n;
        }
        let tracked = self.tracker.update(&clusters);
        RadarFeatures {
            points,
            clusters,
            tracked,
            bev_centers: bundle.radar.bev_drivable.occupied_centers(),
            bev_drivable: bundle.radar.bev_drivable.clone(),
        }
    }
}

/// Extract features from a single frame (no track history).
pub fn extract_features(
    bundle: &FrameBundle,
    cfg: &FeatureConfig,
    ego_velocity: f64,
) -> FeatureSet {
    FeatureExtractor::new(cfg.clone(), ego_velocity).extract(bundle)
}

/// Extract features over an in-order frame window with shared track state.
pub fn extract_sequence(
    bundles: &[FrameBundle],
    cfg: &FeatureConfig,
    ego_velocity: f64,
) -> Vec<FeatureSet> {
    let mut ex = FeatureExtractor::new(cfg.clone(), ego_velocity);
    bundles.iter().map(|b| ex.extract(b)).collect()
}
