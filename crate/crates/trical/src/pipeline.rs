//! Continuous calibration pipeline: frame aggregation and filtering,
//! periodic miscalibration triggers, and dispatch of pairwise + joint
//! optimization.

use crate::features::{FeatureConfig, FeatureExtractor, FeatureSet};
use crate::geometry::{CalibrationState, CameraIntrinsics, EulerPose};
use crate::losses::{
    self, LossWeights, ObjectiveMode, Pair, PairMask, PairValidity, ALL_PAIRS,
};
use crate::optim::{
    calibrate_joint, calibrate_pairwise, CalibrationBounds, DeParams, NmParams, OptimError,
};
use crate::simworld::{FrameBundle, ObjectClass, OracleLabel, PixelClass};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sensor {
    Camera,
    Lidar,
    Radar,
}

/// Scene-content requirements a frame must meet to be used for calibration.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FilterCriteria {
    pub min_sky_fraction: f64,
    pub min_drivable_fraction: f64,
    pub min_road_users: usize,
    pub min_dynamic_clusters: usize,
    pub max_time_skew_ms: f64,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        FilterCriteria {
            min_sky_fraction: 0.20,
            min_drivable_fraction: 0.10,
            min_road_users: 3,
            min_dynamic_clusters: 3,
            max_time_skew_ms: 5.0,
        }
    }
}

/// Misalignment statistics whose threshold crossings initiate re-calibration.
/// The count thresholds are strict ("greater than"), the fraction thresholds
/// are strict fractions of the respective totals.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TriggerThresholds {
    /// Camera-lidar: off-segment fraction of the entire point cloud.
    pub camera_lidar_fraction: f64,
    /// Camera-radar: dynamic detections outside their associated road-user
    /// box; triggers when the count exceeds this.
    pub camera_radar_count: usize,
    /// Lidar-radar: dynamic detections outside every lidar cluster box;
    /// triggers when the count exceeds this.
    pub lidar_radar_count: usize,
    /// Lidar-radar: drivable lidar points outside the radar drivable area,
    /// as a fraction of drivable points.
    pub lidar_radar_drivable_fraction: f64,
    /// Lidar cluster boxes are expanded by this margin for the count test (m).
    pub bbox_margin_m: f64,
    /// Road-user 2D boxes are expanded by this margin (px).
    pub box_margin_px: f64,
    /// Radar drivable mask dilation for the fraction test (cells).
    pub mask_dilate_cells: u32,
    /// A projected lidar point still counts as inside its segment when a
    /// matching pixel lies within this Chebyshev radius (px).
    pub seg_margin_px: u32,
}

impl Default for TriggerThresholds {
    fn default() -> Self {
        TriggerThresholds {
            camera_lidar_fraction: 0.01,
            camera_radar_count: 1,
            lidar_radar_count: 1,
            lidar_radar_drivable_fraction: 0.01,
            bbox_margin_m: 0.5,
            box_margin_px: 20.0,
            mask_dilate_cells: 1,
            seg_margin_px: 2,
        }
    }
}

/// Static per-drive context the pipeline needs beyond the frames themselves.
#[derive(Clone, Debug)]
pub struct SceneContext {
    pub intrinsics: CameraIntrinsics,
    pub ego_velocity: f64,
    /// Class of each scene object, indexed by oracle object id.
    pub object_classes: Vec<ObjectClass>,
}

impl SceneContext {
    pub fn new(scene: &crate::simworld::SceneSpec, rig: &crate::simworld::SensorRig) -> Self {
        SceneContext {
            intrinsics: rig.intrinsics,
            ego_velocity: scene.ego_velocity,
            object_classes: scene.objects.iter().map(|o| o.class).collect(),
        }
    }
}

/// Per-pair validity of one frame against the filter criteria.
pub fn frame_valid(
    bundle: &FrameBundle,
    features: &FeatureSet,
    pair: Pair,
    criteria: &FilterCriteria,
) -> bool {
    let sky_ok = features.camera.sky_fraction() >= criteria.min_sky_fraction;
    let drivable_ok = features.camera.drivable_fraction() >= criteria.min_drivable_fraction;
    let road_users_ok = features.camera.road_users.len() >= criteria.min_road_users;
    let dynamic_ok = features.radar.tracked.len() >= criteria.min_dynamic_clusters;
    let skew_ok = |a, b| bundle.timestamps_ms.skew_ms(a, b) < criteria.max_time_skew_ms;
    match pair {
        Pair::CameraLidar => sky_ok && drivable_ok && skew_ok(Sensor::Camera, Sensor::Lidar),
        Pair::CameraRadar => {
            sky_ok
                && drivable_ok
                && road_users_ok
                && dynamic_ok
                && skew_ok(Sensor::Camera, Sensor::Radar)
        }
        Pair::LidarRadar => {
            features.lidar.drivable.is_some()
                && drivable_ok
                && dynamic_ok
                && skew_ok(Sensor::Lidar, Sensor::Radar)
        }
    }
}

pub fn pair_validity(
    bundle: &FrameBundle,
    features: &FeatureSet,
    criteria: &FilterCriteria,
) -> PairValidity {
    PairValidity {
        camera_lidar: frame_valid(bundle, features, Pair::CameraLidar, criteria),
        camera_radar: frame_valid(bundle, features, Pair::CameraRadar, criteria),
        lidar_radar: frame_valid(bundle, features, Pair::LidarRadar, criteria),
    }
}

fn label_pixel_class(label: OracleLabel, classes: &[ObjectClass]) -> Option<PixelClass> {
    match label {
        OracleLabel::Ground { drivable: true } => Some(PixelClass::Drivable),
        OracleLabel::Ground { drivable: false } => Some(PixelClass::Other),
        OracleLabel::Object(i) => {
            let class = classes.get(i as usize)?;
            if *class == ObjectClass::CornerTarget {
                None // dimensionless, owns no segment
            } else {
                Some(class.pixel_class())
            }
        }
    }
}

/// Evaluate the per-pair misalignment triggers of `state` against one frame.
pub fn check_triggers(
    bundle: &FrameBundle,
    features: &FeatureSet,
    state: &CalibrationState,
    thresholds: &TriggerThresholds,
    ctx: &SceneContext,
) -> Vec<Pair> {
    let mut triggered = Vec::new();
    let intr = &ctx.intrinsics;

    // Camera-lidar: projected points outside their associated segmentation
    // (a small pixel margin absorbs boundary flips from sensor noise and
    // post-calibration residuals).
    {
        let t = state.t_lidar_to_camera();
        let m = thresholds.seg_margin_px as i64;
        let mut off = 0usize;
        let mut total = 0usize;
        for p in &bundle.lidar.points {
            let Some(class) = label_pixel_class(p.label, &ctx.object_classes) else {
                continue;
            };
            total += 1;
            let proj = intr.project(t.transform_point(p.pos));
            if !proj.in_fov {
                off += 1;
                continue;
            }
            let mut inside = false;
            'win: for dy in -m..=m {
                for dx in -m..=m {
                    if bundle
                        .camera
                        .raster
                        .class_at(proj.u + dx as f64, proj.v + dy as f64)
                        == Some(class)
                    {
                        inside = true;
                        break 'win;
                    }
                }
            }
            if !inside {
                off += 1;
            }
        }
        if total > 0 && off as f64 > thresholds.camera_lidar_fraction * total as f64 {
            triggered.push(Pair::CameraLidar);
        }
    }

    // Camera-radar: dynamic detections outside their associated road-user box.
    {
        let t = state.t_radar_to_camera();
        let m = thresholds.box_margin_px;
        let mut off = 0usize;
        for track in &features.radar.tracked {
            for &mi in &track.members {
                let proj = intr.project(t.transform_point(features.radar.points[mi]));
                if !proj.in_fov {
                    off += 1;
                    continue;
                }
                let mut associated_inside = false;
                let mut best = f64::INFINITY;
                let mut best_box = [0.0; 4];
                for ru in &features.camera.road_users {
                    let d = ((proj.u - ru.center_px[0]).powi(2)
                        + (proj.v - ru.center_px[1]).powi(2))
                    .sqrt();
                    if d < best {
                        best = d;
                        best_box = ru.bbox_px;
                    }
                }
                if best <= ctx.intrinsics.width as f64 {
                    // Associate within the loss gate; outside the gate the
                    // detection counts as off-segment outright.
                    if best <= 150.0 {
                        associated_inside = proj.u >= best_box[0] - m
                            && proj.u <= best_box[2] + m
                            && proj.v >= best_box[1] - m
                            && proj.v <= best_box[3] + m;
                    }
                }
                if !associated_inside {
                    off += 1;
                }
            }
        }
        if off > thresholds.camera_radar_count {
            triggered.push(Pair::CameraRadar);
        }
    }

    // Lidar-radar: dynamic detections outside every lidar cluster box, or
    // drivable points outside the radar drivable area.
    {
        let t = state.t_radar_to_lidar();
        let m = thresholds.bbox_margin_m;
        let mut off = 0usize;
        for track in &features.radar.tracked {
            for &mi in &track.members {
                let p = t.transform_point(features.radar.points[mi]);
                let inside = features.lidar.clusters.iter().any(|c| {
                    (0..3).all(|k| p[k] >= c.bbox_min[k] - m && p[k] <= c.bbox_max[k] + m)
                });
                if !inside {
                    off += 1;
                }
            }
        }
        let count_fired = off > thresholds.lidar_radar_count;

        let area_fired = if let Some(driv) = &features.lidar.drivable {
            let radar_mask = features.radar.bev_drivable.dilate(thresholds.mask_dilate_cells);
            let t_inv = t.inverse();
            let outside = driv
                .points
                .iter()
                .filter(|p| {
                    let q = t_inv.transform_point(**p);
                    !radar_mask.get_point(q[0], q[1])
                })
                .count();
            !driv.points.is_empty()
                && outside as f64
                    > thresholds.lidar_radar_drivable_fraction * driv.points.len() as f64
        } else {
            false
        };
        if count_fired || area_fired {
            triggered.push(Pair::LidarRadar);
        }
    }
    triggered
}

/// Pose in reporting units (degrees / meters).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PoseDegrees {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub tx_m: f64,
    pub ty_m: f64,
    pub tz_m: f64,
}

impl From<EulerPose> for PoseDegrees {
    fn from(p: EulerPose) -> Self {
        PoseDegrees {
            yaw_deg: p.yaw.to_degrees(),
            pitch_deg: p.pitch.to_degrees(),
            roll_deg: p.roll.to_degrees(),
            tx_m: p.tx,
            ty_m: p.ty,
            tz_m: p.tz,
        }
    }
}

impl From<PoseDegrees> for EulerPose {
    fn from(p: PoseDegrees) -> Self {
        EulerPose::new(
            p.yaw_deg.to_radians(),
            p.pitch_deg.to_radians(),
            p.roll_deg.to_radians(),
            p.tx_m,
            p.ty_m,
            p.tz_m,
        )
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StateDegrees {
    pub lidar_to_camera: PoseDegrees,
    pub radar_to_lidar: PoseDegrees,
    pub camera_to_radar: PoseDegrees,
}

impl From<CalibrationState> for StateDegrees {
    fn from(s: CalibrationState) -> Self {
        StateDegrees {
            lidar_to_camera: s.lidar_to_camera.into(),
            radar_to_lidar: s.radar_to_lidar.into(),
            camera_to_radar: s.camera_to_radar.into(),
        }
    }
}

impl From<StateDegrees> for CalibrationState {
    fn from(s: StateDegrees) -> Self {
        CalibrationState {
            lidar_to_camera: s.lidar_to_camera.into(),
            radar_to_lidar: s.radar_to_lidar.into(),
            camera_to_radar: s.camera_to_radar.into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum PipelineEvent {
    Calibration {
        frame_index: u64,
        sim_time_ms: f64,
        triggered: Vec<Pair>,
        old_state: StateDegrees,
        new_state: StateDegrees,
        loss_before: f64,
        loss_after: f64,
        frames_used: Vec<u64>,
    },
    InsufficientSamples {
        frame_index: u64,
        triggered: Vec<Pair>,
        valid_counts: [usize; 3],
        needed: usize,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub criteria: FilterCriteria,
    pub thresholds: TriggerThresholds,
    pub features: FeatureConfig,
    pub weights: LossWeights,
    pub de_pairwise: DeParams,
    pub de_joint: DeParams,
    pub nm: NmParams,
    pub pairwise_bounds: CalibrationBounds,
    pub joint_bounds: CalibrationBounds,
    pub mode: ObjectiveMode,
    /// Pairs eligible for optimization; joint refinement runs only when all
    /// three are eligible and `joint_enabled` is set.
    pub pair_mask: PairMask,
    pub joint_enabled: bool,
    /// Trigger checks run every this many frames.
    pub trigger_period: usize,
    /// Valid frames required per triggered pair before optimizing.
    pub min_valid_frames: usize,
    pub buffer_capacity: usize,
    /// At most this many of the most recent valid frames feed each solve
    /// (keeps objective evaluation affordable with a deep buffer).
    pub max_solve_frames: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            criteria: FilterCriteria::default(),
            thresholds: TriggerThresholds::default(),
            features: FeatureConfig::default(),
            weights: LossWeights::default(),
            de_pairwise: DeParams::pairwise(),
            de_joint: DeParams::joint(),
            nm: NmParams::default(),
            pairwise_bounds: CalibrationBounds::pairwise_default(),
            joint_bounds: CalibrationBounds::joint_default(),
            mode: ObjectiveMode::Product,
            pair_mask: PairMask::ALL,
            joint_enabled: true,
            trigger_period: 10,
            min_valid_frames: 10,
            buffer_capacity: 50,
            max_solve_frames: 10,
        }
    }
}

struct BufferedFrame {
    bundle: FrameBundle,
    features: FeatureSet,
    validity: PairValidity,
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub final_state: CalibrationState,
    pub events: Vec<PipelineEvent>,
    pub frames_processed: usize,
    /// True when the drive ended with a pending trigger that never gathered
    /// enough valid frames.
    pub insufficient_samples: bool,
}

/// Run the full pipeline over an in-order frame stream.
pub fn run_pipeline<I>(
    frames: I,
    ctx: &SceneContext,
    init_state: &CalibrationState,
    cfg: &PipelineConfig,
) -> Result<PipelineOutcome, OptimError>
where
    I: IntoIterator<Item = FrameBundle>,
{
    let mut extractor = FeatureExtractor::new(cfg.features.clone(), ctx.ego_velocity);
    let mut buffer: VecDeque<BufferedFrame> = VecDeque::with_capacity(cfg.buffer_capacity);
    let mut state = *init_state;
    let mut events = Vec::new();
    let mut processed = 0usize;
    let mut pending: Option<Vec<Pair>> = None;

    for bundle in frames {
        let features = extractor.extract(&bundle);
        let validity = pair_validity(&bundle, &features, &cfg.criteria);
        buffer.push_back(BufferedFrame { bundle, features, validity });
        if buffer.len() > cfg.buffer_capacity {
            buffer.pop_front();
        }
        processed += 1;
        if processed % cfg.trigger_period != 0 {
            continue;
        }

        // Each pair's trigger is evaluated on its latest valid frame.
        let mut triggered: Vec<Pair> = Vec::new();
        for pair in ALL_PAIRS {
            if !cfg.pair_mask.contains(pair) {
                continue;
            }
            let Some(frame) = buffer.iter().rev().find(|f| f.validity.contains(pair)) else {
                continue;
            };
            let fired =
                check_triggers(&frame.bundle, &frame.features, &state, &cfg.thresholds, ctx);
            if fired.contains(&pair) && !triggered.contains(&pair) {
                triggered.push(pair);
            }
        }
        if triggered.is_empty() {
            continue;
        }

        let valid_counts = [
            buffer.iter().filter(|f| f.validity.camera_lidar).count(),
            buffer.iter().filter(|f| f.validity.camera_radar).count(),
            buffer.iter().filter(|f| f.validity.lidar_radar).count(),
        ];
        let count_of = |p: Pair| match p {
            Pair::CameraLidar => valid_counts[0],
            Pair::CameraRadar => valid_counts[1],
            Pair::LidarRadar => valid_counts[2],
        };
        if triggered.iter().any(|p| count_of(*p) < cfg.min_valid_frames) {
            pending = Some(triggered);
            continue;
        }

        // Calibrate: pairwise per triggered pair, then joint refinement.
        // Only the most recent `max_solve_frames` valid frames per pair feed
        // the objective.
        let feature_refs: Vec<&FeatureSet> = buffer.iter().map(|f| &f.features).collect();
        let mut validities: Vec<PairValidity> = buffer.iter().map(|f| f.validity).collect();
        for pair in ALL_PAIRS {
            let mut kept = 0;
            for v in validities.iter_mut().rev() {
                let field = match pair {
                    Pair::CameraLidar => &mut v.camera_lidar,
                    Pair::CameraRadar => &mut v.camera_radar,
                    Pair::LidarRadar => &mut v.lidar_radar,
                };
                if *field {
                    if kept >= cfg.max_solve_frames {
                        *field = false;
                    } else {
                        kept += 1;
                    }
                }
            }
        }
        let frames_used: Vec<u64> = buffer
            .iter()
            .zip(&validities)
            .filter(|(_, v)| v.camera_lidar || v.camera_radar || v.lidar_radar)
            .map(|(f, _)| f.bundle.frame_index)
            .collect();
        let old_state = state;
        let loss_before = losses::evaluate_objective(
            &feature_refs,
            Some(&validities),
            &state,
            &ctx.intrinsics,
            &cfg.weights,
            &PairMask::ALL,
            cfg.mode,
            true,
        )?;
        // Optimize the triggered pairs and, with them, the rest of the
        // eligible suite: several misalignment directions (vertical, pitch)
        // are invisible to a pair's own trigger statistics but still wrong.
        let mut new_state = state;
        for pair in ALL_PAIRS {
            if !cfg.pair_mask.contains(pair) {
                continue;
            }
            if !triggered.contains(&pair) && count_of(pair) == 0 {
                continue;
            }
            let result = match calibrate_pairwise(
                &feature_refs,
                Some(&validities),
                pair,
                &new_state,
                &cfg.pairwise_bounds,
                &cfg.de_pairwise,
                &cfg.nm,
                &cfg.weights,
                &ctx.intrinsics,
            ) {
                Ok(r) => r,
                Err(OptimError::Loss(losses::LossError::NothingToCalibrate)) => continue,
                Err(e) => return Err(e),
            };
            new_state = match pair {
                Pair::CameraLidar => CalibrationState { lidar_to_camera: result.pose, ..new_state },
                Pair::CameraRadar => CalibrationState { camera_to_radar: result.pose, ..new_state },
                Pair::LidarRadar => CalibrationState { radar_to_lidar: result.pose, ..new_state },
            };
        }
        if cfg.joint_enabled && cfg.pair_mask == PairMask::ALL {
            new_state = crate::optim::consistency_polish(
                &feature_refs,
                Some(&validities),
                &new_state,
                &cfg.pairwise_bounds,
                &cfg.nm,
                &cfg.weights,
                &ctx.intrinsics,
            );
            new_state = crate::optim::refine_camera_common(
                &feature_refs,
                Some(&validities),
                &new_state,
                &cfg.de_pairwise,
                &cfg.nm,
                &cfg.weights,
                &ctx.intrinsics,
            );
            let joint = calibrate_joint(
                &feature_refs,
                Some(&validities),
                &new_state,
                &cfg.joint_bounds,
                &cfg.de_joint,
                &cfg.nm,
                &cfg.weights,
                &ctx.intrinsics,
                cfg.mode,
            )?;
            new_state = joint.state;
        }
        let loss_after = losses::evaluate_objective(
            &feature_refs,
            Some(&validities),
            &new_state,
            &ctx.intrinsics,
            &cfg.weights,
            &PairMask::ALL,
            cfg.mode,
            true,
        )?;
        let latest = buffer.back().expect("buffer nonempty");
        events.push(PipelineEvent::Calibration {
            frame_index: latest.bundle.frame_index,
            sim_time_ms: latest.bundle.timestamps_ms.lidar_ms,
            triggered: triggered.clone(),
            old_state: old_state.into(),
            new_state: new_state.into(),
            loss_before,
            loss_after,
            frames_used,
        });
        state = new_state;
        pending = None;
    }

    let insufficient = pending.is_some();
    if let Some(triggered) = pending {
        let valid_counts = [
            buffer.iter().filter(|f| f.validity.camera_lidar).count(),
            buffer.iter().filter(|f| f.validity.camera_radar).count(),
            buffer.iter().filter(|f| f.validity.lidar_radar).count(),
        ];
        events.push(PipelineEvent::InsufficientSamples {
            frame_index: buffer.back().map(|f| f.bundle.frame_index).unwrap_or(0),
            triggered,
            valid_counts,
            needed: cfg.min_valid_frames,
        });
    }

    Ok(PipelineOutcome {
        final_state: state,
        events,
        frames_processed: processed,
        insufficient_samples: insufficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::{generate_scene, render_frame, NoiseParams, SceneKind, SensorRig};

    fn setup() -> (crate::simworld::SceneSpec, SensorRig, FrameBundle, FeatureSet) {
        let mut scene = generate_scene(SceneKind::Urban, 11);
        scene.noise = NoiseParams::NONE;
        let rig = SensorRig::standard();
        let frames = crate::simworld::simulate_drive(&scene, &rig, 4, 0.1).unwrap();
        let sets =
            crate::features::extract_sequence(&frames, &FeatureConfig::default(), scene.ego_velocity);
        let bundle = frames.into_iter().nth(3).unwrap();
        let fs = sets.into_iter().nth(3).unwrap();
        (scene, rig, bundle, fs)
    }

    #[test]
    fn ground_truth_state_triggers_nothing() {
        let (scene, rig, bundle, fs) = setup();
        let ctx = SceneContext::new(&scene, &rig);
        let fired = check_triggers(
            &bundle,
            &fs,
            &rig.extrinsics,
            &TriggerThresholds::default(),
            &ctx,
        );
        assert!(fired.is_empty(), "fired: {fired:?}");
    }

    #[test]
    fn yaw_error_triggers_camera_lidar() {
        let (scene, rig, bundle, fs) = setup();
        let ctx = SceneContext::new(&scene, &rig);
        let mut state = rig.extrinsics;
        state.lidar_to_camera.yaw += 3f64.to_radians();
        let fired =
            check_triggers(&bundle, &fs, &state, &TriggerThresholds::default(), &ctx);
        assert!(fired.contains(&Pair::CameraLidar), "fired: {fired:?}");
    }

    #[test]
    fn frame_validity_on_healthy_urban_frame() {
        let (scene, rig, bundle, fs) = setup();
        let _ = (scene, rig);
        let crit = FilterCriteria::default();
        assert!(frame_valid(&bundle, &fs, Pair::CameraLidar, &crit));
        assert!(frame_valid(&bundle, &fs, Pair::CameraRadar, &crit));
        assert!(frame_valid(&bundle, &fs, Pair::LidarRadar, &crit));
    }

    #[test]
    fn skew_boundary_is_strict() {
        let (_, _, mut bundle, fs) = setup();
        let crit = FilterCriteria::default();
        bundle.timestamps_ms.camera_ms = bundle.timestamps_ms.lidar_ms + 5.0;
        assert!(
            !frame_valid(&bundle, &fs, Pair::CameraLidar, &crit),
            "exactly 5 ms is not under 5 ms"
        );
        bundle.timestamps_ms.camera_ms = bundle.timestamps_ms.lidar_ms + 4.999;
        assert!(frame_valid(&bundle, &fs, Pair::CameraLidar, &crit));
    }

    #[test]
    fn state_degrees_roundtrip() {
        let s = SensorRig::standard().extrinsics;
        let deg: StateDegrees = s.into();
        let back: CalibrationState = deg.into();
        for (a, b) in s.to_array().iter().zip(back.to_array()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
