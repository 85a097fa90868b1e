//! Deterministic synthetic multi-sensor world.
//!
//! Generates urban / highway scenes (axis-aligned boxes over a ground plane
//! with a drivable-area polygon), renders per-sensor measurements with
//! configurable noise, and exposes ground-truth extrinsics plus semantic
//! oracle labels in place of learned extractors. Everything is a pure
//! function of `(scene, rig, seed, time)`; noise is drawn from counter-based
//! streams keyed per (seed, frame, sensor, element), so frames can be
//! rendered in parallel and datasets are byte-stable across runs.

mod dataset;
mod render;

pub use dataset::{read_dataset, write_dataset, DatasetError, Manifest, FORMAT_VERSION};
pub use render::render_frame;

use crate::geometry::{
    CalibrationState, CameraIntrinsics, EulerPose, RigidTransform, Vec3,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("rig ground-truth state violates cyclic consistency (residual {residual:.3e})")]
    InconsistentRig { residual: f64 },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid drive parameters: {0}")]
    InvalidDrive(String),
}

/// Semantic class of a rendered camera pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum PixelClass {
    Sky = 0,
    Drivable = 1,
    Vehicle = 2,
    Pedestrian = 3,
    Pole = 4,
    Sign = 5,
    Building = 6,
    Fence = 7,
    Vegetation = 8,
    Other = 9,
}

pub const NUM_PIXEL_CLASSES: usize = 10;

impl PixelClass {
    pub fn from_u8(v: u8) -> PixelClass {
        match v {
            0 => PixelClass::Sky,
            1 => PixelClass::Drivable,
            2 => PixelClass::Vehicle,
            3 => PixelClass::Pedestrian,
            4 => PixelClass::Pole,
            5 => PixelClass::Sign,
            6 => PixelClass::Building,
            7 => PixelClass::Fence,
            8 => PixelClass::Vegetation,
            _ => PixelClass::Other,
        }
    }

    /// Classes known to reflect lidar: everything solid, i.e. not sky,
    /// drivable surface or bare ground.
    pub fn is_reflective(self) -> bool {
        matches!(
            self,
            PixelClass::Vehicle
                | PixelClass::Pedestrian
                | PixelClass::Pole
                | PixelClass::Sign
                | PixelClass::Building
                | PixelClass::Fence
                | PixelClass::Vegetation
        )
    }

    pub fn is_road_user(self) -> bool {
        matches!(self, PixelClass::Vehicle | PixelClass::Pedestrian)
    }
}

/// Scene object class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectClass {
    Vehicle,
    Pedestrian,
    Pole,
    Sign,
    Building,
    Fence,
    Vegetation,
    CornerTarget,
}

impl ObjectClass {
    pub fn pixel_class(self) -> PixelClass {
        match self {
            ObjectClass::Vehicle => PixelClass::Vehicle,
            ObjectClass::Pedestrian => PixelClass::Pedestrian,
            ObjectClass::Pole => PixelClass::Pole,
            ObjectClass::Sign => PixelClass::Sign,
            ObjectClass::Building => PixelClass::Building,
            ObjectClass::Fence => PixelClass::Fence,
            ObjectClass::Vegetation => PixelClass::Vegetation,
            // Corner targets are dimensionless and never rasterized; the
            // class is only a placeholder.
            ObjectClass::CornerTarget => PixelClass::Other,
        }
    }

    pub fn is_road_user(self) -> bool {
        matches!(self, ObjectClass::Vehicle | ObjectClass::Pedestrian)
    }
}

/// Oracle label attached to lidar returns and radar detections.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleLabel {
    /// Ground return; `drivable` tells whether it lies inside the polygon.
    Ground { drivable: bool },
    /// Index into `SceneSpec::objects`.
    Object(u32),
}

impl Serialize for OracleLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v: i64 = match self {
            OracleLabel::Object(i) => *i as i64,
            OracleLabel::Ground { drivable: true } => -1,
            OracleLabel::Ground { drivable: false } => -2,
        };
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for OracleLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Ok(match v {
            -1 => OracleLabel::Ground { drivable: true },
            -2 => OracleLabel::Ground { drivable: false },
            i if i >= 0 => OracleLabel::Object(i as u32),
            _ => return Err(serde::de::Error::custom("bad oracle label")),
        })
    }
}

/// Axis-aligned box (or a dimensionless point for corner targets) with a
/// constant velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class: ObjectClass,
    pub min: Vec3,
    pub max: Vec3,
    pub velocity: Vec3,
}

impl SceneObject {
    pub fn center(&self) -> Vec3 {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }
}

/// Per-sensor noise magnitudes; all default to plausible automotive values
/// and can be zeroed for exact-geometry runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub lidar_range_sigma: f64,
    pub radar_range_sigma: f64,
    pub radar_azimuth_sigma_deg: f64,
    pub radar_doppler_sigma: f64,
    pub timestamp_jitter_ms: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            lidar_range_sigma: 0.02,
            radar_range_sigma: 0.1,
            radar_azimuth_sigma_deg: 0.3,
            radar_doppler_sigma: 0.1,
            timestamp_jitter_ms: 1.0,
        }
    }
}

impl NoiseParams {
    pub const NONE: NoiseParams = NoiseParams {
        lidar_range_sigma: 0.0,
        radar_range_sigma: 0.0,
        radar_azimuth_sigma_deg: 0.0,
        radar_doppler_sigma: 0.0,
        timestamp_jitter_ms: 0.0,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    Urban,
    Highway,
    /// Controlled, stationary corner-reflector lot used for evaluation.
    CornerLot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub objects: Vec<SceneObject>,
    /// Drivable-area polygon on the ground plane z = 0, world frame.
    pub drivable_polygon: Vec<[f64; 2]>,
    /// Ego forward speed along +x (m/s).
    pub ego_velocity: f64,
    pub seed: u64,
    pub noise: NoiseParams,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        for (i, o) in self.objects.iter().enumerate() {
            if o.class == ObjectClass::CornerTarget {
                if o.min != o.max || o.velocity != [0.0; 3] {
                    return Err(SimError::InvalidScene(format!(
                        "corner target {i} must be a stationary point"
                    )));
                }
            } else if !(o.min[0] < o.max[0] && o.min[1] < o.max[1] && o.min[2] < o.max[2]) {
                return Err(SimError::InvalidScene(format!(
                    "object {i} must have positive extents"
                )));
            }
        }
        if self.drivable_polygon.len() < 3 {
            return Err(SimError::InvalidScene("drivable polygon needs >= 3 vertices".into()));
        }
        Ok(())
    }

    pub fn road_user_count(&self) -> usize {
        self.objects.iter().filter(|o| o.class.is_road_user()).count()
    }

    pub fn corners(&self) -> Vec<Vec3> {
        self.objects
            .iter()
            .filter(|o| o.class == ObjectClass::CornerTarget)
            .map(|o| o.min)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LidarSpec {
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
    pub res_h_deg: f64,
    pub res_v_deg: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadarSpec {
    pub res_h_deg: f64,
    pub res_v_deg: f64,
}

/// Sensor suite: intrinsics, fields of view, resolutions, shared range limits
/// and the ground-truth extrinsic state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorRig {
    pub intrinsics: CameraIntrinsics,
    pub camera_fov_deg: [f64; 2],
    pub lidar: LidarSpec,
    pub radar: RadarSpec,
    pub min_range: f64,
    pub max_range: f64,
    /// Pose of the lidar in the ego frame (transform lidar -> ego).
    pub lidar_mount: EulerPose,
    /// Ground-truth pairwise extrinsics.
    pub extrinsics: CalibrationState,
}

impl SensorRig {
    /// The standard rig: camera 116 x 58.5 deg at 1824x940, lidar 60 x 24 deg
    /// on a 0.25 deg grid, radar matching the lidar FOV at 1.6 x 6 deg
    /// resolution, ranges 5..80 m. Lidar on the roof, radar at the bumper
    /// (pure translation between them), camera behind the windshield with
    /// the usual vision axis convention.
    pub fn standard() -> SensorRig {
        let width = 1824u32;
        let height = 940u32;
        let fov_h: f64 = 116.0;
        let fov_v: f64 = 58.5;
        let fx = width as f64 / 2.0 / (fov_h / 2.0).to_radians().tan();
        let fy = height as f64 / 2.0 / (fov_v / 2.0).to_radians().tan();
        let intrinsics = CameraIntrinsics {
            fx,
            fy,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        };

        // Mount points in the ego frame (x forward, y left, z up).
        let lidar_pos = [0.0, 0.0, 2.0];
        let camera_pos = [1.5, 0.0, 1.25];
        let radar_pos = [2.0, 0.0, 0.25];

        // Camera axes: x right (-y ego), y down (-z ego), z forward (+x ego).
        let r_ego_to_cam = [[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]];
        // Lidar/radar axes coincide with ego axes.
        let lidar_to_camera = {
            // p_cam = R (p_ego - camera_pos), p_ego = p_lidar + lidar_pos.
            let d = crate::geometry::sub(lidar_pos, camera_pos);
            let t = [
                r_ego_to_cam[0][0] * d[0] + r_ego_to_cam[0][1] * d[1] + r_ego_to_cam[0][2] * d[2],
                r_ego_to_cam[1][0] * d[0] + r_ego_to_cam[1][1] * d[1] + r_ego_to_cam[1][2] * d[2],
                r_ego_to_cam[2][0] * d[0] + r_ego_to_cam[2][1] * d[1] + r_ego_to_cam[2][2] * d[2],
            ];
            RigidTransform::from_parts(r_ego_to_cam, t).to_euler()
        };
        let radar_to_lidar = EulerPose::new(
            0.0,
            0.0,
            0.0,
            radar_pos[0] - lidar_pos[0],
            radar_pos[1] - lidar_pos[1],
            radar_pos[2] - lidar_pos[2],
        );
        let extrinsics = CalibrationState::consistent(lidar_to_camera, radar_to_lidar);

        SensorRig {
            intrinsics,
            camera_fov_deg: [fov_h, fov_v],
            lidar: LidarSpec { fov_h_deg: 60.0, fov_v_deg: 24.0, res_h_deg: 0.25, res_v_deg: 0.25 },
            radar: RadarSpec { res_h_deg: 1.6, res_v_deg: 6.0 },
            min_range: 5.0,
            max_range: 80.0,
            lidar_mount: EulerPose::new(0.0, 0.0, 0.0, lidar_pos[0], lidar_pos[1], lidar_pos[2]),
            extrinsics,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let residual = self
            .extrinsics
            .cyclic_transform()
            .max_abs_diff(&RigidTransform::IDENTITY);
        if residual > 1e-9 {
            return Err(SimError::InconsistentRig { residual });
        }
        if !(self.min_range < self.max_range && self.min_range > 0.0) {
            return Err(SimError::InvalidScene("range limits".into()));
        }
        Ok(())
    }

    /// Transform from the ego frame into each sensor frame.
    pub fn ego_to_lidar(&self) -> RigidTransform {
        RigidTransform::from_euler(&self.lidar_mount).inverse()
    }

    pub fn ego_to_camera(&self) -> RigidTransform {
        self.extrinsics.t_lidar_to_camera().compose(&self.ego_to_lidar())
    }

    pub fn ego_to_radar(&self) -> RigidTransform {
        self.extrinsics.t_radar_to_lidar().inverse().compose(&self.ego_to_lidar())
    }
}

/// Uniform perturbation bounds per directed pair, degrees / meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    /// Per pair (lidar->camera, radar->lidar, camera->radar): absolute
    /// per-axis rotation bounds in degrees.
    pub rotation_bounds_deg: [[f64; 3]; 3],
    /// Per pair: absolute per-axis translation bounds in meters.
    pub translation_bounds_m: [[f64; 3]; 3],
    pub seed: u64,
}

impl PerturbationSpec {
    /// Same scalar bound on every axis of every pair.
    pub fn uniform(rotation_deg: f64, translation_m: f64, seed: u64) -> Self {
        PerturbationSpec {
            rotation_bounds_deg: [[rotation_deg; 3]; 3],
            translation_bounds_m: [[translation_m; 3]; 3],
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self
            .rotation_bounds_deg
            .iter()
            .chain(self.translation_bounds_m.iter())
            .all(|b| b.iter().all(|v| *v >= 0.0));
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidScene("perturbation bounds must be non-negative".into()))
        }
    }
}

/// Draw per-pair pose offsets within the spec bounds and left-compose them
/// onto the rig's ground-truth extrinsics. Returns the de-calibrated rig
/// (its state generally violates cyclic consistency, so it no longer renders)
/// together with the exact applied offsets for later error measurement.
pub fn perturb_rig(rig: &SensorRig, spec: &PerturbationSpec) -> (SensorRig, CalibrationState) {
    spec.validate().expect("invalid perturbation spec");
    let mut rng = crate::rng::Rng::stream(spec.seed, &[0x50455254]);
    let mut offsets = [EulerPose::IDENTITY; 3];
    for (pair, offset) in offsets.iter_mut().enumerate() {
        let rb = spec.rotation_bounds_deg[pair];
        let tb = spec.translation_bounds_m[pair];
        let draw = |rng: &mut crate::rng::Rng, b: f64| if b == 0.0 { 0.0 } else { rng.uniform(-b, b) };
        *offset = EulerPose::new(
            draw(&mut rng, rb[0]).to_radians(),
            draw(&mut rng, rb[1]).to_radians(),
            draw(&mut rng, rb[2]).to_radians(),
            draw(&mut rng, tb[0]),
            draw(&mut rng, tb[1]),
            draw(&mut rng, tb[2]),
        );
    }
    let apply = |offset: &EulerPose, pose: &EulerPose| {
        RigidTransform::from_euler(offset)
            .compose(&RigidTransform::from_euler(pose))
            .to_euler()
    };
    let mut out = rig.clone();
    out.extrinsics = CalibrationState {
        lidar_to_camera: apply(&offsets[0], &rig.extrinsics.lidar_to_camera),
        radar_to_lidar: apply(&offsets[1], &rig.extrinsics.radar_to_lidar),
        camera_to_radar: apply(&offsets[2], &rig.extrinsics.camera_to_radar),
    };
    let applied = CalibrationState {
        lidar_to_camera: offsets[0],
        radar_to_lidar: offsets[1],
        camera_to_radar: offsets[2],
    };
    (out, applied)
}

/// Advance the scene and render `n_frames` bundles `dt` seconds apart.
pub fn simulate_drive(
    scene: &SceneSpec,
    rig: &SensorRig,
    n_frames: usize,
    dt: f64,
) -> Result<Vec<crate::simworld::FrameBundle>, SimError> {
    if n_frames < 1 {
        return Err(SimError::InvalidDrive("n_frames must be >= 1".into()));
    }
    if !(dt > 0.0) {
        return Err(SimError::InvalidDrive("dt must be positive".into()));
    }
    (0..n_frames)
        .map(|i| render_frame(scene, rig, i as u64, i as f64 * dt))
        .collect()
}

pub use render::{CameraData, FrameBundle, LidarData, LidarPoint, RadarData, RadarDetection, Raster, RoadUserDetection, Timestamps};

/// Procedurally generate an urban or highway scene. Deterministic for fixed
/// `(kind, seed)`. Urban scenes carry at least five road users plus buildings
/// and poles; highway scenes carry at least three (faster) vehicles,
/// guard-rail fences and a wider drivable area.
pub fn generate_scene(kind: SceneKind, seed: u64) -> SceneSpec {
    assert!(
        kind != SceneKind::CornerLot,
        "corner lots are built with corner_lot_scene"
    );
    let mut rng = crate::rng::Rng::stream(seed, &[0x5343454E, kind as u64]);
    let mut objects: Vec<SceneObject> = Vec::new();

    let boxed = |class: ObjectClass, cx: f64, cy: f64, lx: f64, ly: f64, z0: f64, z1: f64, vel: Vec3| {
        SceneObject {
            class,
            min: [cx - lx / 2.0, cy - ly / 2.0, z0],
            max: [cx + lx / 2.0, cy + ly / 2.0, z1],
            velocity: vel,
        }
    };
    // Every solid object floats >= 0.3 m above the road so ground-plane
    // inliers never bleed into object clusters.
    const Z0: f64 = 0.3;

    match kind {
        SceneKind::Urban => {
            // Buildings along both sides, set back from the road so the sky
            // stays visible above their rooflines.
            for side in [-1.0, 1.0] {
                let mut x = 8.0 + rng.uniform(0.0, 2.0);
                while x < 72.0 {
                    let len = rng.uniform(6.0, 8.5);
                    let depth = rng.uniform(4.0, 6.0);
                    let height = rng.uniform(5.5, 7.0);
                    let cy = side * (14.0 + rng.uniform(0.0, 1.0) + depth / 2.0);
                    objects.push(boxed(
                        ObjectClass::Building,
                        x + len / 2.0,
                        cy,
                        len,
                        depth,
                        Z0,
                        height,
                        [0.0; 3],
                    ));
                    x += len + rng.uniform(3.5, 5.0);
                }
            }
            // Poles and signs on alternating sides.
            for (i, base_x) in [10.0, 22.0, 34.0, 46.0, 58.0].iter().enumerate() {
                let side = if i % 2 == 0 { 1.0 } else { -1.0 };
                let x = base_x + rng.uniform(-1.0, 1.0);
                objects.push(boxed(ObjectClass::Pole, x, side * 6.9, 0.22, 0.22, Z0, 6.0, [0.0; 3]));
            }
            for (x, side) in [(16.0, -1.0), (40.0, 1.0)] {
                let x = x + rng.uniform(-0.5, 0.5);
                objects.push(boxed(ObjectClass::Sign, x, side * 6.6, 0.8, 0.15, 2.2, 2.9, [0.0; 3]));
            }
            // Vegetation bushes between the pole line and the buildings.
            for x in [14.0, 30.0, 50.0, 66.0] {
                let side = if x as i64 % 4 == 0 { 1.0 } else { -1.0 };
                objects.push(boxed(
                    ObjectClass::Vegetation,
                    x + rng.uniform(-0.8, 0.8),
                    side * 8.75,
                    1.0,
                    1.0,
                    Z0,
                    1.5,
                    [0.0; 3],
                ));
            }
            // Road users: one moving vehicle per direction (same-lane pairs
            // occlude each other's lidar returns), three pedestrians on the
            // sidewalks, one of them standing.
            let v_jit = |rng: &mut crate::rng::Rng| rng.uniform(-0.8, 0.8);
            objects.push(boxed(ObjectClass::Vehicle, 18.0 + v_jit(&mut rng), -2.1, 4.4, 1.8, Z0, 1.75, [7.0, 0.0, 0.0]));
            objects.push(boxed(ObjectClass::Vehicle, 42.0 + v_jit(&mut rng), 2.1, 4.4, 1.8, Z0, 1.75, [-8.0, 0.0, 0.0]));
            objects.push(boxed(ObjectClass::Pedestrian, 20.0 + v_jit(&mut rng), 5.3, 0.45, 0.45, Z0, 1.9, [-1.4, 0.0, 0.0]));
            objects.push(boxed(ObjectClass::Pedestrian, 27.0 + rng.uniform(-0.5, 0.5), -5.3, 0.45, 0.45, Z0, 1.9, [-1.3, 0.0, 0.0]));
            objects.push(boxed(ObjectClass::Pedestrian, 26.0 + rng.uniform(-0.5, 0.5), 5.3, 0.45, 0.45, Z0, 1.9, [0.0, 0.0, 0.0]));

            SceneSpec {
                kind,
                objects,
                drivable_polygon: vec![[2.0, -4.5], [90.0, -4.5], [90.0, 4.5], [2.0, 4.5]],
                ego_velocity: 2.0,
                seed,
                noise: NoiseParams::default(),
            }
        }
        SceneKind::Highway => {
            // Guard rails along both sides.
            for side in [-1.0, 1.0] {
                objects.push(boxed(ObjectClass::Fence, 45.0, side * 10.0, 80.0, 0.3, Z0, 0.85, [0.0; 3]));
            }
            // Sparse poles behind the rails.
            for x in [25.0, 55.0] {
                let side = if x < 40.0 { 1.0 } else { -1.0 };
                objects.push(boxed(
                    ObjectClass::Pole,
                    x + rng.uniform(-1.0, 1.0),
                    side * 11.6,
                    0.25,
                    0.25,
                    Z0,
                    7.0,
                    [0.0; 3],
                ));
            }
            // Vegetation berms.
            for x in [38.0, 68.0] {
                let side = if x as i64 % 3 == 0 { -1.0 } else { 1.0 };
                objects.push(boxed(
                    ObjectClass::Vegetation,
                    x + rng.uniform(-1.0, 1.0),
                    side * 12.2,
                    1.6,
                    1.6,
                    Z0,
                    1.6,
                    [0.0; 3],
                ));
            }
            // One distant building block.
            objects.push(boxed(ObjectClass::Building, 68.0, 16.8, 9.0, 5.0, Z0, 10.0, [0.0; 3]));
            // Fast vehicles in four lanes; relative speeds stay under the
            // tracker's 2 m association gate per 0.1 s frame.
            let v_jit = |rng: &mut crate::rng::Rng| rng.uniform(-1.2, 1.2);
            objects.push(boxed(ObjectClass::Vehicle, 18.0 + v_jit(&mut rng), -5.5, 4.6, 1.9, Z0, 1.8, [19.0, 0.0, 0.0]));
            objects.push(boxed(ObjectClass::Vehicle, 30.0 + v_jit(&mut rng), -1.8, 4.6, 1.9, Z0, 1.8, [16.0, 0.0, 0.0]));
            objects.push(boxed(ObjectClass::Vehicle, 70.0 + v_jit(&mut rng), 1.8, 4.6, 1.9, Z0, 1.8, [-14.0, 0.0, 0.0]));
            objects.push(boxed(ObjectClass::Vehicle, 78.0 + v_jit(&mut rng), 5.5, 4.6, 1.9, Z0, 1.8, [-15.0, 0.0, 0.0]));

            SceneSpec {
                kind,
                objects,
                drivable_polygon: vec![[2.0, -9.5], [95.0, -9.5], [95.0, 9.5], [2.0, 9.5]],
                ego_velocity: 3.0,
                seed,
                noise: NoiseParams::default(),
            }
        }
        SceneKind::CornerLot => unreachable!(),
    }
}

/// Controlled evaluation scene: a leveled empty lot with trihedral corner
/// reflectors at the given world positions (meters).
pub fn corner_lot_scene(corners: &[Vec3], seed: u64) -> SceneSpec {
    let objects = corners
        .iter()
        .map(|&p| SceneObject {
            class: ObjectClass::CornerTarget,
            min: p,
            max: p,
            velocity: [0.0; 3],
        })
        .collect();
    SceneSpec {
        kind: SceneKind::CornerLot,
        objects,
        drivable_polygon: vec![[2.0, -15.0], [60.0, -15.0], [60.0, 15.0], [2.0, 15.0]],
        ego_velocity: 0.0,
        seed,
        noise: NoiseParams::NONE,
    }
}

/// Default corner placements: varying range-azimuth combinations at 1 m
/// height.
pub const DEFAULT_CORNERS: [Vec3; 3] = [[15.0, -5.0, 1.0], [25.0, 0.0, 1.0], [35.0, 6.0, 1.0]];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_scene_is_deterministic() {
        let a = generate_scene(SceneKind::Urban, 42);
        let b = generate_scene(SceneKind::Urban, 42);
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn urban_scene_contents() {
        let s = generate_scene(SceneKind::Urban, 42);
        s.validate().unwrap();
        assert!(s.road_user_count() >= 5);
        assert!(s.road_user_count() >= 3, "meets the validity precondition");
        assert!(s.objects.iter().any(|o| o.class == ObjectClass::Building));
        assert!(s.objects.iter().any(|o| o.class == ObjectClass::Pole));
    }

    #[test]
    fn highway_scene_contents() {
        let s = generate_scene(SceneKind::Highway, 7);
        s.validate().unwrap();
        assert!(s.objects.iter().filter(|o| o.class == ObjectClass::Vehicle).count() >= 3);
        assert!(s.objects.iter().any(|o| o.class == ObjectClass::Fence));
        let urban = generate_scene(SceneKind::Urban, 7);
        // Distinct class mixes.
        let mix = |s: &SceneSpec, c: ObjectClass| s.objects.iter().filter(|o| o.class == c).count();
        assert_ne!(mix(&s, ObjectClass::Building), mix(&urban, ObjectClass::Building));
        assert!(mix(&s, ObjectClass::Fence) > 0 && mix(&urban, ObjectClass::Fence) == 0);
        // Larger drivable area.
        let area = |poly: &[[f64; 2]]| {
            let mut a = 0.0;
            for i in 0..poly.len() {
                let j = (i + 1) % poly.len();
                a += poly[i][0] * poly[j][1] - poly[j][0] * poly[i][1];
            }
            a.abs() / 2.0
        };
        assert!(area(&s.drivable_polygon) > area(&urban.drivable_polygon));
    }

    #[test]
    fn objects_keep_clearance_for_clustering() {
        // No two solid objects closer than the lidar DBSCAN eps (0.8 m) at
        // any point of a three-second drive, otherwise clusters merge and
        // oracle anchors lose their meaning.
        for kind in [SceneKind::Urban, SceneKind::Highway] {
            for seed in 0..25 {
                let s = generate_scene(kind, seed);
                for t in [0.0, 1.5, 3.0] {
                    for i in 0..s.objects.len() {
                        for j in (i + 1)..s.objects.len() {
                            let (a, b) = (&s.objects[i], &s.objects[j]);
                            let shift = |o: &SceneObject, k: usize| o.velocity[k] * t;
                            let gap = (0..3)
                                .map(|k| {
                                    let (sa, sb) = (shift(a, k), shift(b, k));
                                    ((a.min[k] + sa) - (b.max[k] + sb))
                                        .max((b.min[k] + sb) - (a.max[k] + sa))
                                        .max(0.0)
                                })
                                .map(|g| g * g)
                                .sum::<f64>()
                                .sqrt();
                            assert!(
                                gap > 1.2,
                                "{kind:?} seed {seed} t {t}: objects {i},{j} gap {gap}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn standard_rig_is_consistent() {
        let rig = SensorRig::standard();
        rig.validate().unwrap();
        assert!(
            rig.extrinsics
                .cyclic_transform()
                .max_abs_diff(&RigidTransform::IDENTITY)
                < 1e-9
        );
        // Radar->lidar is a pure translation in 0.25 m multiples.
        let p = rig.extrinsics.radar_to_lidar;
        assert_eq!((p.yaw, p.pitch, p.roll), (0.0, 0.0, 0.0));
        for t in [p.tx, p.ty, p.tz] {
            assert!((t / 0.25 - (t / 0.25).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn perturb_rig_zero_bounds_is_identity() {
        let rig = SensorRig::standard();
        let (out, applied) = perturb_rig(&rig, &PerturbationSpec::uniform(0.0, 0.0, 1));
        assert_eq!(out.extrinsics, rig.extrinsics);
        assert_eq!(applied.lidar_to_camera, EulerPose::IDENTITY);
    }

    #[test]
    fn perturb_rig_is_deterministic_and_bounded() {
        let rig = SensorRig::standard();
        let spec = PerturbationSpec::uniform(5.0, 0.3, 99);
        let (a, off_a) = perturb_rig(&rig, &spec);
        let (b, off_b) = perturb_rig(&rig, &spec);
        assert_eq!(a.extrinsics, b.extrinsics);
        assert_eq!(off_a, off_b);
        for pose in [off_a.lidar_to_camera, off_a.radar_to_lidar, off_a.camera_to_radar] {
            for ang in [pose.yaw, pose.pitch, pose.roll] {
                assert!(ang.abs() <= 5.0f64.to_radians());
            }
            for t in [pose.tx, pose.ty, pose.tz] {
                assert!(t.abs() <= 0.3);
            }
        }
    }

    #[test]
    fn perturbation_undoes_by_composition() {
        // Compose with the inverse of the applied offsets -> original truth.
        let rig = SensorRig::standard();
        let (out, applied) = perturb_rig(&rig, &PerturbationSpec::uniform(5.0, 0.3, 7));
        let undo = |offset: &EulerPose, pose: &EulerPose| {
            RigidTransform::from_euler(offset)
                .inverse()
                .compose(&RigidTransform::from_euler(pose))
        };
        let back = undo(&applied.lidar_to_camera, &out.extrinsics.lidar_to_camera);
        let truth = rig.extrinsics.t_lidar_to_camera();
        assert!(back.max_abs_diff(&truth) < 1e-9);
    }

    #[test]
    fn corner_lot_has_point_targets() {
        let s = corner_lot_scene(&DEFAULT_CORNERS, 0);
        s.validate().unwrap();
        assert_eq!(s.corners().len(), 3);
    }
}
