//! Run configuration: one strict TOML document drives every command.
//!
//! Unknown keys are rejected; every key has a documented default (see
//! [`CONFIG_REFERENCE`]). Angles are degrees in the file and in all outputs;
//! the library computes in radians.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;
use trical::features::{DbscanParams, FeatureConfig, RansacParams, TrackerParams};
use trical::losses::{LossWeights, ObjectiveMode, Pair, PairMask};
use trical::optim::{CalibrationBounds, DeParams, NmParams};
use trical::pipeline::{FilterCriteria, PipelineConfig, TriggerThresholds};
use trical::simworld::{NoiseParams, PerturbationSpec, SceneKind};

/// Documented key-by-key reference printed with `--help`.
pub const CONFIG_REFERENCE: &str = r#"CONFIG FILE REFERENCE (TOML; every key optional; unknown keys rejected)

seed = 42                  # master seed; drives scene, noise and solvers

[scene]
kind = "urban"             # urban | highway | corner_lot
corners = [[15.0,-5.0,1.0],[25.0,0.0,1.0],[35.0,6.0,1.0]]
                           # corner_lot targets (world meters)

[drive]
frames = 20                # frames to simulate (>= 1)
dt = 0.1                   # frame period, seconds

[noise]                    # standard deviations; zero for exact geometry
lidar_range_sigma = 0.02   # m
radar_range_sigma = 0.1    # m
radar_azimuth_sigma_deg = 0.3
radar_doppler_sigma = 0.1  # m/s
timestamp_jitter_ms = 1.0

[perturbation]             # de-calibration of the initial state
rotation_deg = 0.0         # uniform per-axis bound, all pairs
translation_m = 0.0

[features]
sample_target = 8000       # uniform-sampling target for lidar clouds
lidar_eps = 0.8            # DBSCAN radius, lidar (m)
lidar_min_pts = 5
radar_eps = 1.5            # DBSCAN radius, radar (m)
radar_min_pts = 2
ransac_thresh = 0.15       # ground-plane inlier distance (m)
ransac_iterations = 200
ransac_min_inlier_fraction = 0.3
v_dyn = 0.5                # dynamic-cluster Doppler threshold (m/s)
track_gate = 2.0           # track association gate (m)
track_confirm = 3          # consecutive associations to confirm

[weights]
penalty_weight = 1.0       # sky / out-of-FOV projection penalty
camera_gate_px = 150.0     # pixel association gate
bev_gate_m = 3.0           # metric association gate
metric_norm_m = 5.0        # metric distance normalizer
iou_weight = 1.0           # drivable-area IoU term weight
global_length_scale_m = 1.0

[filter]                   # frame validity criteria
min_sky_fraction = 0.20
min_drivable_fraction = 0.10
min_road_users = 3
min_dynamic_clusters = 3
max_time_skew_ms = 5.0

[triggers]                 # re-calibration thresholds
camera_lidar_fraction = 0.01
camera_radar_count = 1     # strict: fires when count exceeds this
lidar_radar_count = 1
lidar_radar_drivable_fraction = 0.01
bbox_margin_m = 0.5
box_margin_px = 20.0
mask_dilate_cells = 1
seg_margin_px = 2

[solver]
de_population_pairwise = 60
de_population_joint = 90
de_generations_pairwise = 200
de_generations_joint = 300
differential_weight = 0.8
differential_weight_low = 0.5
crossover_rate = 0.9
stagnation_tol = 1e-8
stagnation_window = 20
nm_spread_tol = 1e-10
nm_max_iterations = 500
pairwise_rotation_bound_deg = 10.0
pairwise_translation_bound_m = 1.0
joint_rotation_bound_deg = 2.0
joint_translation_bound_m = 0.25

[pipeline]
trigger_period = 10        # frames between trigger checks
min_valid_frames = 10      # valid frames per triggered pair
buffer_capacity = 50
max_solve_frames = 10      # newest valid frames per solve

[objective]
mode = "product"           # product: (1+L_P)(1+L_G); sum: L_P + L_G
pairs = ["camera-lidar","camera-radar","lidar-radar"]
                           # restricting this list disables joint refinement
joint = true               # false: decoupled pairwise configuration only
"#;

fn default_seed() -> u64 {
    42
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub scene: SceneSection,
    #[serde(default)]
    pub drive: DriveSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub perturbation: PerturbationSection,
    #[serde(default)]
    pub features: FeaturesSection,
    #[serde(default)]
    pub weights: WeightsSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub triggers: TriggersSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default)]
    pub objective: ObjectiveSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config parses")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    pub kind: String,
    pub corners: Option<Vec<[f64; 3]>>,
}

impl Default for SceneSection {
    fn default() -> Self {
        SceneSection { kind: "urban".into(), corners: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    pub frames: usize,
    pub dt: f64,
}

impl Default for DriveSection {
    fn default() -> Self {
        DriveSection { frames: 20, dt: 0.1 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub lidar_range_sigma: f64,
    pub radar_range_sigma: f64,
    pub radar_azimuth_sigma_deg: f64,
    pub radar_doppler_sigma: f64,
    pub timestamp_jitter_ms: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseParams::default();
        NoiseSection {
            lidar_range_sigma: n.lidar_range_sigma,
            radar_range_sigma: n.radar_range_sigma,
            radar_azimuth_sigma_deg: n.radar_azimuth_sigma_deg,
            radar_doppler_sigma: n.radar_doppler_sigma,
            timestamp_jitter_ms: n.timestamp_jitter_ms,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationSection {
    pub rotation_deg: f64,
    pub translation_m: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesSection {
    pub sample_target: usize,
    pub lidar_eps: f64,
    pub lidar_min_pts: usize,
    pub radar_eps: f64,
    pub radar_min_pts: usize,
    pub ransac_thresh: f64,
    pub ransac_iterations: usize,
    pub ransac_min_inlier_fraction: f64,
    pub v_dyn: f64,
    pub track_gate: f64,
    pub track_confirm: usize,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        let f = FeatureConfig::default();
        FeaturesSection {
            sample_target: f.sample_target,
            lidar_eps: f.lidar_dbscan.eps,
            lidar_min_pts: f.lidar_dbscan.min_pts,
            radar_eps: f.radar_dbscan.eps,
            radar_min_pts: f.radar_dbscan.min_pts,
            ransac_thresh: f.ransac.inlier_thresh,
            ransac_iterations: f.ransac.iterations,
            ransac_min_inlier_fraction: f.ransac.min_inlier_fraction,
            v_dyn: f.tracker.v_dyn,
            track_gate: f.tracker.gate,
            track_confirm: f.tracker.confirm,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsSection {
    pub penalty_weight: f64,
    pub camera_gate_px: f64,
    pub bev_gate_m: f64,
    pub metric_norm_m: f64,
    pub iou_weight: f64,
    pub global_length_scale_m: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        let w = LossWeights::default();
        WeightsSection {
            penalty_weight: w.penalty_weight,
            camera_gate_px: w.camera_gate_px,
            bev_gate_m: w.bev_gate_m,
            metric_norm_m: w.metric_norm_m,
            iou_weight: w.iou_weight,
            global_length_scale_m: w.global_length_scale_m,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub min_sky_fraction: f64,
    pub min_drivable_fraction: f64,
    pub min_road_users: usize,
    pub min_dynamic_clusters: usize,
    pub max_time_skew_ms: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        let c = FilterCriteria::default();
        FilterSection {
            min_sky_fraction: c.min_sky_fraction,
            min_drivable_fraction: c.min_drivable_fraction,
            min_road_users: c.min_road_users,
            min_dynamic_clusters: c.min_dynamic_clusters,
            max_time_skew_ms: c.max_time_skew_ms,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TriggersSection {
    pub camera_lidar_fraction: f64,
    pub camera_radar_count: usize,
    pub lidar_radar_count: usize,
    pub lidar_radar_drivable_fraction: f64,
    pub bbox_margin_m: f64,
    pub box_margin_px: f64,
    pub mask_dilate_cells: u32,
    pub seg_margin_px: u32,
}

impl Default for TriggersSection {
    fn default() -> Self {
        let t = TriggerThresholds::default();
        TriggersSection {
            camera_lidar_fraction: t.camera_lidar_fraction,
            camera_radar_count: t.camera_radar_count,
            lidar_radar_count: t.lidar_radar_count,
            lidar_radar_drivable_fraction: t.lidar_radar_drivable_fraction,
            bbox_margin_m: t.bbox_margin_m,
            box_margin_px: t.box_margin_px,
            mask_dilate_cells: t.mask_dilate_cells,
            seg_margin_px: t.seg_margin_px,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub de_population_pairwise: usize,
    pub de_population_joint: usize,
    pub de_generations_pairwise: usize,
    pub de_generations_joint: usize,
    pub differential_weight: f64,
    pub differential_weight_low: f64,
    pub crossover_rate: f64,
    pub stagnation_tol: f64,
    pub stagnation_window: usize,
    pub nm_spread_tol: f64,
    pub nm_max_iterations: usize,
    pub pairwise_rotation_bound_deg: f64,
    pub pairwise_translation_bound_m: f64,
    pub joint_rotation_bound_deg: f64,
    pub joint_translation_bound_m: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let de_p = DeParams::pairwise();
        let de_j = DeParams::joint();
        let nm = NmParams::default();
        let pb = CalibrationBounds::pairwise_default();
        let jb = CalibrationBounds::joint_default();
        SolverSection {
            de_population_pairwise: de_p.population,
            de_population_joint: de_j.population,
            de_generations_pairwise: de_p.max_generations,
            de_generations_joint: de_j.max_generations,
            differential_weight: de_p.differential_weight,
            differential_weight_low: de_p.differential_weight_low,
            crossover_rate: de_p.crossover_rate,
            stagnation_tol: de_p.stagnation_tol,
            stagnation_window: de_p.stagnation_window,
            nm_spread_tol: nm.spread_tol,
            nm_max_iterations: nm.max_iterations,
            pairwise_rotation_bound_deg: pb.rotation_rad.to_degrees(),
            pairwise_translation_bound_m: pb.translation_m,
            joint_rotation_bound_deg: jb.rotation_rad.to_degrees(),
            joint_translation_bound_m: jb.translation_m,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub trigger_period: usize,
    pub min_valid_frames: usize,
    pub buffer_capacity: usize,
    pub max_solve_frames: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let p = PipelineConfig::default();
        PipelineSection {
            trigger_period: p.trigger_period,
            min_valid_frames: p.min_valid_frames,
            buffer_capacity: p.buffer_capacity,
            max_solve_frames: p.max_solve_frames,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveSection {
    pub mode: String,
    pub pairs: Vec<String>,
    /// Joint (coupled) refinement after the pairwise stage; forced off when
    /// `pairs` does not cover all three.
    pub joint: bool,
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        ObjectiveSection {
            mode: "product".into(),
            pairs: vec!["camera-lidar".into(), "camera-radar".into(), "lidar-radar".into()],
            joint: true,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.drive.frames == 0 {
            bail!("drive.frames must be >= 1");
        }
        if !(self.drive.dt > 0.0) {
            bail!("drive.dt must be positive");
        }
        self.scene_kind()?;
        self.objective_mode()?;
        self.pair_mask()?;
        if self.perturbation.rotation_deg < 0.0 || self.perturbation.translation_m < 0.0 {
            bail!("perturbation bounds must be non-negative");
        }
        Ok(())
    }

    pub fn scene_kind(&self) -> Result<SceneKind> {
        match self.scene.kind.as_str() {
            "urban" => Ok(SceneKind::Urban),
            "highway" => Ok(SceneKind::Highway),
            "corner_lot" => Ok(SceneKind::CornerLot),
            other => bail!("scene.kind must be urban | highway | corner_lot, got {other:?}"),
        }
    }

    pub fn objective_mode(&self) -> Result<ObjectiveMode> {
        match self.objective.mode.as_str() {
            "product" => Ok(ObjectiveMode::Product),
            "sum" => Ok(ObjectiveMode::Sum),
            other => bail!("objective.mode must be product | sum, got {other:?}"),
        }
    }

    pub fn pair_mask(&self) -> Result<PairMask> {
        let mut mask = PairMask { camera_lidar: false, camera_radar: false, lidar_radar: false };
        if self.objective.pairs.is_empty() {
            bail!("objective.pairs must not be empty");
        }
        for p in &self.objective.pairs {
            let pair = Pair::parse(p)
                .with_context(|| format!("unknown pair {p:?} in objective.pairs"))?;
            mask.set(pair, true);
        }
        Ok(mask)
    }

    pub fn noise_params(&self) -> NoiseParams {
        NoiseParams {
            lidar_range_sigma: self.noise.lidar_range_sigma,
            radar_range_sigma: self.noise.radar_range_sigma,
            radar_azimuth_sigma_deg: self.noise.radar_azimuth_sigma_deg,
            radar_doppler_sigma: self.noise.radar_doppler_sigma,
            timestamp_jitter_ms: self.noise.timestamp_jitter_ms,
        }
    }

    pub fn perturbation_spec(&self) -> PerturbationSpec {
        PerturbationSpec::uniform(
            self.perturbation.rotation_deg,
            self.perturbation.translation_m,
            self.seed ^ 0x5045,
        )
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            sample_target: self.features.sample_target,
            lidar_dbscan: DbscanParams {
                eps: self.features.lidar_eps,
                min_pts: self.features.lidar_min_pts,
            },
            radar_dbscan: DbscanParams {
                eps: self.features.radar_eps,
                min_pts: self.features.radar_min_pts,
            },
            ransac: RansacParams {
                inlier_thresh: self.features.ransac_thresh,
                iterations: self.features.ransac_iterations,
                min_inlier_fraction: self.features.ransac_min_inlier_fraction,
                seed: self.seed ^ 0x52,
            },
            tracker: TrackerParams {
                v_dyn: self.features.v_dyn,
                gate: self.features.track_gate,
                confirm: self.features.track_confirm,
            },
            lidar_dynamic_thresh: FeatureConfig::default().lidar_dynamic_thresh,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            penalty_weight: self.weights.penalty_weight,
            camera_gate_px: self.weights.camera_gate_px,
            bev_gate_m: self.weights.bev_gate_m,
            metric_norm_m: self.weights.metric_norm_m,
            iou_weight: self.weights.iou_weight,
            global_length_scale_m: self.weights.global_length_scale_m,
        }
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        let pair_mask = self.pair_mask()?;
        let joint_enabled = self.objective.joint && pair_mask == PairMask::ALL;
        Ok(PipelineConfig {
            criteria: FilterCriteria {
                min_sky_fraction: self.filter.min_sky_fraction,
                min_drivable_fraction: self.filter.min_drivable_fraction,
                min_road_users: self.filter.min_road_users,
                min_dynamic_clusters: self.filter.min_dynamic_clusters,
                max_time_skew_ms: self.filter.max_time_skew_ms,
            },
            thresholds: TriggerThresholds {
                camera_lidar_fraction: self.triggers.camera_lidar_fraction,
                camera_radar_count: self.triggers.camera_radar_count,
                lidar_radar_count: self.triggers.lidar_radar_count,
                lidar_radar_drivable_fraction: self.triggers.lidar_radar_drivable_fraction,
                bbox_margin_m: self.triggers.bbox_margin_m,
                box_margin_px: self.triggers.box_margin_px,
                mask_dilate_cells: self.triggers.mask_dilate_cells,
                seg_margin_px: self.triggers.seg_margin_px,
            },
            features: self.feature_config(),
            weights: self.loss_weights(),
            de_pairwise: DeParams {
                population: self.solver.de_population_pairwise,
                differential_weight: self.solver.differential_weight,
                differential_weight_low: self.solver.differential_weight_low,
                crossover_rate: self.solver.crossover_rate,
                max_generations: self.solver.de_generations_pairwise,
                stagnation_tol: self.solver.stagnation_tol,
                stagnation_window: self.solver.stagnation_window,
                seed: self.seed ^ 0xDE,
            },
            de_joint: DeParams {
                population: self.solver.de_population_joint,
                differential_weight: self.solver.differential_weight,
                differential_weight_low: self.solver.differential_weight_low,
                crossover_rate: self.solver.crossover_rate,
                max_generations: self.solver.de_generations_joint,
                stagnation_tol: self.solver.stagnation_tol,
                stagnation_window: self.solver.stagnation_window,
                seed: self.seed ^ 0xDE0,
            },
            nm: NmParams {
                spread_tol: self.solver.nm_spread_tol,
                max_iterations: self.solver.nm_max_iterations,
                ..NmParams::default()
            },
            pairwise_bounds: CalibrationBounds {
                rotation_rad: self.solver.pairwise_rotation_bound_deg.to_radians(),
                translation_m: self.solver.pairwise_translation_bound_m,
            },
            joint_bounds: CalibrationBounds {
                rotation_rad: self.solver.joint_rotation_bound_deg.to_radians(),
                translation_m: self.solver.joint_translation_bound_m,
            },
            mode: self.objective_mode()?,
            pair_mask,
            joint_enabled,
            trigger_period: self.pipeline.trigger_period,
            min_valid_frames: self.pipeline.min_valid_frames,
            buffer_capacity: self.pipeline.buffer_capacity,
            max_solve_frames: self.pipeline.max_solve_frames,
        })
    }
}
