//! Alignment losses: three pairwise feature losses, the global cyclic
//! self-consistency loss, and their combination.
//!
//! All distances are capped at an association gate so unmatched items give a
//! bounded cost, then normalized (pixel distances by image width, metric
//! distances by 5 m) so the three pair losses are commensurate. A pair term
//! with no features is *absent* and excluded from means - never zero, which
//! would reward feature-free frames.

use crate::features::FeatureSet;
use crate::geometry::{CalibrationState, CameraIntrinsics, RigidTransform, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("BEV grids have mismatched geometry")]
    GridMismatch,
    #[error("nothing to calibrate: every pair term is absent on every frame")]
    NothingToCalibrate,
}

/// Loss weights, gates and normalizers.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LossWeights {
    /// Weight of the sky / out-of-FOV projection penalty.
    pub penalty_weight: f64,
    /// Camera-space association gate (pixels).
    pub camera_gate_px: f64,
    /// Metric association gate (m).
    pub bev_gate_m: f64,
    /// Normalizer for metric distances (m).
    pub metric_norm_m: f64,
    /// Weight of the drivable-area IoU term.
    pub iou_weight: f64,
    /// Length scale folding meters into the global l1 loss (m).
    pub global_length_scale_m: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            penalty_weight: 1.0,
            camera_gate_px: 150.0,
            bev_gate_m: 3.0,
            metric_norm_m: 5.0,
            iou_weight: 1.0,
            global_length_scale_m: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> bool {
        self.penalty_weight > 0.0
            && self.camera_gate_px > 0.0
            && self.bev_gate_m > 0.0
            && self.metric_norm_m > 0.0
            && self.iou_weight > 0.0
            && self.global_length_scale_m > 0.0
    }
}

/// Boolean occupancy raster in a bird's-eye-view metric grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BevGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub cell: f64,
    nx: u32,
    ny: u32,
    words: Vec<u64>,
}

impl BevGrid {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, cell: f64) -> Self {
        assert!(x_max > x_min && y_max > y_min && cell > 0.0);
        let nx = ((x_max - x_min) / cell).round() as u32;
        let ny = ((y_max - y_min) / cell).round() as u32;
        let words = vec![0u64; (nx as usize * ny as usize).div_ceil(64)];
        BevGrid { x_min, x_max, y_min, y_max, cell, nx, ny, words }
    }

    /// The default grid: x in [0, 80] m forward, y in [-40, 40] m lateral,
    /// 0.25 m cells.
    pub fn standard() -> Self {
        BevGrid::new(0.0, 80.0, -40.0, 40.0, 0.25)
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.nx, self.ny)
    }

    fn index(&self, x: f64, y: f64) -> Option<usize> {
        if x < self.x_min || y < self.y_min {
            return None;
        }
        let ix = ((x - self.x_min) / self.cell) as u32;
        let iy = ((y - self.y_min) / self.cell) as u32;
        if ix >= self.nx || iy >= self.ny {
            return None;
        }
        Some(iy as usize * self.nx as usize + ix as usize)
    }

    pub fn set_point(&mut self, x: f64, y: f64) {
        if let Some(i) = self.index(x, y) {
            self.words[i >> 6] |= 1 << (i & 63);
        }
    }

    pub fn get_point(&self, x: f64, y: f64) -> bool {
        match self.index(x, y) {
            Some(i) => self.words[i >> 6] & (1 << (i & 63)) != 0,
            None => false,
        }
    }

    pub fn set_cell(&mut self, ix: u32, iy: u32) {
        let i = iy as usize * self.nx as usize + ix as usize;
        self.words[i >> 6] |= 1 << (i & 63);
    }

    pub fn get_cell(&self, ix: u32, iy: u32) -> bool {
        let i = iy as usize * self.nx as usize + ix as usize;
        self.words[i >> 6] & (1 << (i & 63)) != 0
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Centers of every occupied cell.
    pub fn occupied_centers(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.count());
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                if self.get_cell(ix, iy) {
                    out.push([
                        self.x_min + (ix as f64 + 0.5) * self.cell,
                        self.y_min + (iy as f64 + 0.5) * self.cell,
                    ]);
                }
            }
        }
        out
    }

    /// Morphological dilation by `cells` in Chebyshev distance.
    pub fn dilate(&self, cells: u32) -> BevGrid {
        let mut out = self.clone();
        if cells == 0 {
            return out;
        }
        let r = cells as i64;
        for iy in 0..self.ny as i64 {
            for ix in 0..self.nx as i64 {
                if !self.get_cell(ix as u32, iy as u32) {
                    continue;
                }
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (x, y) = (ix + dx, iy + dy);
                        if x >= 0 && y >= 0 && x < self.nx as i64 && y < self.ny as i64 {
                            out.set_cell(x as u32, y as u32);
                        }
                    }
                }
            }
        }
        out
    }

    fn same_geometry(&self, other: &BevGrid) -> bool {
        self.x_min == other.x_min
            && self.x_max == other.x_max
            && self.y_min == other.y_min
            && self.y_max == other.y_max
            && self.cell == other.cell
    }
}

/// Intersection-over-union of two identically shaped grids; 1 when both are
/// empty.
pub fn bev_iou(a: &BevGrid, b: &BevGrid) -> Result<f64, LossError> {
    if !a.same_geometry(b) {
        return Err(LossError::GridMismatch);
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (wa, wb) in a.words.iter().zip(&b.words) {
        inter += (wa & wb).count_ones() as usize;
        union += (wa | wb).count_ones() as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Sensor pair selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pair {
    CameraLidar,
    CameraRadar,
    LidarRadar,
}

pub const ALL_PAIRS: [Pair; 3] = [Pair::CameraLidar, Pair::CameraRadar, Pair::LidarRadar];

impl Pair {
    pub fn label(&self) -> &'static str {
        match self {
            Pair::CameraLidar => "camera-lidar",
            Pair::CameraRadar => "camera-radar",
            Pair::LidarRadar => "lidar-radar",
        }
    }

    pub fn parse(s: &str) -> Option<Pair> {
        match s {
            "camera-lidar" => Some(Pair::CameraLidar),
            "camera-radar" => Some(Pair::CameraRadar),
            "lidar-radar" => Some(Pair::LidarRadar),
            _ => None,
        }
    }
}

/// Which pairs participate in an objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairMask {
    pub camera_lidar: bool,
    pub camera_radar: bool,
    pub lidar_radar: bool,
}

impl PairMask {
    pub const ALL: PairMask =
        PairMask { camera_lidar: true, camera_radar: true, lidar_radar: true };

    pub fn only(pair: Pair) -> PairMask {
        let mut m = PairMask { camera_lidar: false, camera_radar: false, lidar_radar: false };
        m.set(pair, true);
        m
    }

    pub fn set(&mut self, pair: Pair, v: bool) {
        match pair {
            Pair::CameraLidar => self.camera_lidar = v,
            Pair::CameraRadar => self.camera_radar = v,
            Pair::LidarRadar => self.lidar_radar = v,
        }
    }

    pub fn contains(&self, pair: Pair) -> bool {
        match pair {
            Pair::CameraLidar => self.camera_lidar,
            Pair::CameraRadar => self.camera_radar,
            Pair::LidarRadar => self.lidar_radar,
        }
    }
}

/// Camera-lidar loss: projected cluster centroids should land on reflective
/// semantics; sampled points landing on sky or outside the FOV are penalized.
/// `None` when the frame has no lidar clusters.
pub fn loss_camera_lidar(
    features: &FeatureSet,
    t_lidar_to_camera: &RigidTransform,
    intr: &CameraIntrinsics,
    weights: &LossWeights,
) -> Option<f64> {
    let clusters = &features.lidar.clusters;
    if clusters.is_empty() {
        return None;
    }
    let width = intr.width as f64;
    let mut dist_sum = 0.0;
    let mut dist_n = 0usize;
    for c in clusters {
        let proj = intr.project(t_lidar_to_camera.transform_point(c.centroid));
        if !proj.in_fov {
            continue;
        }
        let d = if features.camera.reflective_mask.get_at(proj.u, proj.v) {
            0.0
        } else {
            features
                .camera
                .reflective_dist
                .query(proj.u, proj.v)
                .min(weights.camera_gate_px)
        };
        dist_sum += d / width;
        dist_n += 1;
    }
    let dist_term = if dist_n > 0 { dist_sum / dist_n as f64 } else { 0.0 };

    let mut bad = 0usize;
    let total = features.lidar.sampled.len();
    for p in &features.lidar.sampled {
        let proj = intr.project(t_lidar_to_camera.transform_point(p.pos));
        if !proj.in_fov || features.camera.sky_mask.get_at(proj.u, proj.v) {
            bad += 1;
        }
    }
    let penalty = if total > 0 {
        weights.penalty_weight * bad as f64 / total as f64
    } else {
        0.0
    };
    Some(dist_term + penalty)
}

/// Camera-radar loss: projected dynamic track centers should land on the
/// nearest detected road user's center; all radar detections landing on sky
/// or outside the FOV are penalized. `None` when the frame has no tracks.
pub fn loss_camera_radar(
    features: &FeatureSet,
    t_radar_to_camera: &RigidTransform,
    intr: &CameraIntrinsics,
    weights: &LossWeights,
) -> Option<f64> {
    let tracked = &features.radar.tracked;
    if tracked.is_empty() {
        return None;
    }
    let width = intr.width as f64;
    let mut dist_sum = 0.0;
    let mut dist_n = 0usize;
    for t in tracked {
        let proj = intr.project(t_radar_to_camera.transform_point(t.center));
        if !proj.in_fov {
            continue;
        }
        let mut best = f64::INFINITY;
        for ru in &features.camera.road_users {
            let du = proj.u - ru.center_px[0];
            let dv = proj.v - ru.center_px[1];
            best = best.min((du * du + dv * dv).sqrt());
        }
        dist_sum += best.min(weights.camera_gate_px) / width;
        dist_n += 1;
    }
    let dist_term = if dist_n > 0 { dist_sum / dist_n as f64 } else { 0.0 };

    let mut bad = 0usize;
    let total = features.radar.points.len();
    for p in &features.radar.points {
        let proj = intr.project(t_radar_to_camera.transform_point(*p));
        if !proj.in_fov || features.camera.sky_mask.get_at(proj.u, proj.v) {
            bad += 1;
        }
    }
    let penalty = if total > 0 {
        weights.penalty_weight * bad as f64 / total as f64
    } else {
        0.0
    };
    Some(dist_term + penalty)
}

/// Lidar-radar loss: drivable-area BEV IoU plus dynamic-track distances to
/// the nearest lidar cluster centroid. `None` when both terms are absent.
pub fn loss_lidar_radar(
    features: &FeatureSet,
    t_radar_to_lidar: &RigidTransform,
    weights: &LossWeights,
) -> Option<f64> {
    // Term A: 1 - IoU of the lidar drivable raster vs the radar drivable
    // raster carried into the lidar frame. Radar BEV cells are treated as
    // points in the sensor's horizontal plane (z = 0).
    let term_a = features.lidar.drivable.as_ref().and_then(|driv| {
        if features.radar.bev_centers.is_empty() {
            return None;
        }
        let mut transformed = BevGrid::new(
            driv.bev.x_min,
            driv.bev.x_max,
            driv.bev.y_min,
            driv.bev.y_max,
            driv.bev.cell,
        );
        for c in &features.radar.bev_centers {
            let p = t_radar_to_lidar.transform_point([c[0], c[1], 0.0]);
            transformed.set_point(p[0], p[1]);
        }
        let iou = bev_iou(&driv.bev, &transformed).expect("grids share geometry");
        Some(1.0 - iou)
    });

    // Term B: mean gated 3D distance from each tracked radar cluster to the
    // nearest lidar cluster centroid.
    let term_b = if features.radar.tracked.is_empty() {
        None
    } else {
        let mut sum = 0.0;
        for t in &features.radar.tracked {
            let p = t_radar_to_lidar.transform_point(t.center);
            let mut best = f64::INFINITY;
            for c in &features.lidar.clusters {
                best = best.min(crate::geometry::norm(crate::geometry::sub(p, c.centroid)));
            }
            sum += best.min(weights.bev_gate_m) / weights.metric_norm_m;
        }
        Some(sum / features.radar.tracked.len() as f64)
    };

    match (term_a, term_b) {
        (None, None) => None,
        (a, b) => {
            let mut num = 0.0;
            let mut den = 0.0;
            if let Some(a) = a {
                num += weights.iou_weight * a;
                den += weights.iou_weight;
            }
            if let Some(b) = b {
                num += b;
                den += 1.0;
            }
            Some(num / den)
        }
    }
}

/// Global self-consistency loss: l1 norm of the cyclic transform's Euler
/// angles and translation (meters scaled by the configured length scale).
/// Zero iff the cyclic transform is the identity.
pub fn loss_global(state: &CalibrationState, weights: &LossWeights) -> f64 {
    state
        .cyclic_transform()
        .to_euler()
        .l1_norm(weights.global_length_scale_m)
}

/// Per-frame pair validity gate used by the pipeline; `None` means every
/// frame counts for every pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairValidity {
    pub camera_lidar: bool,
    pub camera_radar: bool,
    pub lidar_radar: bool,
}

impl PairValidity {
    pub const ALL: PairValidity =
        PairValidity { camera_lidar: true, camera_radar: true, lidar_radar: true };

    pub fn contains(&self, pair: Pair) -> bool {
        match pair {
            Pair::CameraLidar => self.camera_lidar,
            Pair::CameraRadar => self.camera_radar,
            Pair::LidarRadar => self.lidar_radar,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct PairwiseLoss {
    pub camera_lidar: Option<f64>,
    pub camera_radar: Option<f64>,
    pub lidar_radar: Option<f64>,
    /// Sum of the present per-pair means.
    pub total: f64,
    /// Frames contributing per pair.
    pub counts: [usize; 3],
}

/// Pairwise loss L_P over a frame window: per masked pair, the mean over
/// frames where the term is present (absent terms excluded from the
/// denominator), summed across pairs. Errors when every term is absent
/// everywhere.
pub fn loss_pairwise_total(
    frames: &[&FeatureSet],
    validity: Option<&[PairValidity]>,
    state: &CalibrationState,
    intr: &CameraIntrinsics,
    weights: &LossWeights,
    mask: &PairMask,
) -> Result<PairwiseLoss, LossError> {
    if let Some(v) = validity {
        assert_eq!(v.len(), frames.len());
    }
    let t_lc = state.t_lidar_to_camera();
    let t_rc = state.t_radar_to_camera();
    let t_rl = state.t_radar_to_lidar();
    let mut sums = [0.0f64; 3];
    let mut counts = [0usize; 3];
    for (fi, fs) in frames.iter().enumerate() {
        let valid = validity.map_or(PairValidity::ALL, |v| v[fi]);
        if mask.camera_lidar && valid.camera_lidar {
            if let Some(l) = loss_camera_lidar(fs, &t_lc, intr, weights) {
                sums[0] += l;
                counts[0] += 1;
            }
        }
        if mask.camera_radar && valid.camera_radar {
            if let Some(l) = loss_camera_radar(fs, &t_rc, intr, weights) {
                sums[1] += l;
                counts[1] += 1;
            }
        }
        if mask.lidar_radar && valid.lidar_radar {
            if let Some(l) = loss_lidar_radar(fs, &t_rl, weights) {
                sums[2] += l;
                counts[2] += 1;
            }
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(LossError::NothingToCalibrate);
    }
    let mean = |i: usize| if counts[i] > 0 { Some(sums[i] / counts[i] as f64) } else { None };
    let (cl, cr, lr) = (mean(0), mean(1), mean(2));
    Ok(PairwiseLoss {
        camera_lidar: cl,
        camera_radar: cr,
        lidar_radar: lr,
        total: cl.unwrap_or(0.0) + cr.unwrap_or(0.0) + lr.unwrap_or(0.0),
        counts,
    })
}

/// How L_P and L_G combine into the full objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// (1 + L_P)(1 + L_G); the optimization method's default.
    Product,
    /// L_P + L_G; the additive alternative.
    Sum,
}

pub fn loss_combined(l_pairwise: f64, l_global: f64, mode: ObjectiveMode) -> f64 {
    match mode {
        ObjectiveMode::Product => (1.0 + l_pairwise) * (1.0 + l_global),
        ObjectiveMode::Sum => l_pairwise + l_global,
    }
}

/// Serializable loss breakdown for diagnostics (`--dump-losses`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LossReport {
    pub l_cam_lidar: Option<f64>,
    pub l_cam_radar: Option<f64>,
    pub l_lidar_radar: Option<f64>,
    pub l_pairwise_total: f64,
    pub l_global: f64,
    pub combined: f64,
    pub mode: ObjectiveMode,
    pub frame_counts: [usize; 3],
    pub absent: [bool; 3],
}

impl LossReport {
    pub fn build(
        pairwise: &PairwiseLoss,
        l_global: f64,
        mode: ObjectiveMode,
    ) -> LossReport {
        LossReport {
            l_cam_lidar: pairwise.camera_lidar,
            l_cam_radar: pairwise.camera_radar,
            l_lidar_radar: pairwise.lidar_radar,
            l_pairwise_total: pairwise.total,
            l_global,
            combined: loss_combined(pairwise.total, l_global, mode),
            mode,
            frame_counts: pairwise.counts,
            absent: [
                pairwise.camera_lidar.is_none(),
                pairwise.camera_radar.is_none(),
                pairwise.lidar_radar.is_none(),
            ],
        }
    }
}

/// Helper for multi-frame objectives: combined loss of a state over frames.
pub fn evaluate_objective(
    frames: &[&FeatureSet],
    validity: Option<&[PairValidity]>,
    state: &CalibrationState,
    intr: &CameraIntrinsics,
    weights: &LossWeights,
    mask: &PairMask,
    mode: ObjectiveMode,
    include_global: bool,
) -> Result<f64, LossError> {
    let lp = loss_pairwise_total(frames, validity, state, intr, weights, mask)?;
    let lg = if include_global { loss_global(state, weights) } else { 0.0 };
    Ok(loss_combined(lp.total, lg, mode))
}

pub use crate::geometry::Vec3 as BevPoint3;

#[allow(dead_code)]
fn _assert_types(_: Vec3) {}
