//! Per-sensor measurement rendering.
//!
//! The oracle is constructed so that, with zero noise, every cross-modal
//! feature agrees exactly under the ground-truth extrinsics: lidar returns
//! whose ground-truth projection disagrees with the raster class are dropped,
//! radar detections form a symmetric pattern whose center of mass equals the
//! object's sampled-lidar centroid, camera road-user centers are the
//! projection of that same centroid, and the radar drivable mask rasterizes
//! the same sampled ground returns the lidar pipeline will find.

use super::{ObjectClass, OracleLabel, PixelClass, SceneSpec, SensorRig, SimError};
use crate::features::sampling::uniform_sample;
use crate::features::DEFAULT_SAMPLE_TARGET;
use crate::geometry::{add, cross, dot, from_spherical, normalize, scale, sub, to_spherical, Vec3};
use crate::losses::BevGrid;
use crate::rng::{Rng, STREAM_LIDAR, STREAM_RADAR, STREAM_TIMESTAMP};
use rayon::prelude::*;
use serde::de::SeqAccess;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize};

/// Row-major semantic class raster; serialized run-length encoded.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl Raster {
    pub fn class_at(&self, u: f64, v: f64) -> Option<PixelClass> {
        if u < 0.0 || v < 0.0 {
            return None;
        }
        let (x, y) = (u as u32, v as u32);
        if x >= self.width || y >= self.height {
            return None;
        }
        Some(PixelClass::from_u8(self.data[y as usize * self.width as usize + x as usize]))
    }
}

impl Serialize for Raster {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut runs: Vec<(u8, u32)> = Vec::new();
        for &b in &self.data {
            match runs.last_mut() {
                Some((v, n)) if *v == b => *n += 1,
                _ => runs.push((b, 1)),
            }
        }
        let mut st = s.serialize_struct("Raster", 3)?;
        st.serialize_field("width", &self.width)?;
        st.serialize_field("height", &self.height)?;
        st.serialize_field("runs", &runs)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Raster {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = Raster;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("run-length encoded raster")
            }
            fn visit_map<A: serde::de::MapAccess<'de>>(self, mut map: A) -> Result<Raster, A::Error> {
                let mut width = None;
                let mut height = None;
                let mut runs: Option<Vec<(u8, u32)>> = None;
                while let Some(key) = map.next_key::<String>()? {
                    match key.as_str() {
                        "width" => width = Some(map.next_value()?),
                        "height" => height = Some(map.next_value()?),
                        "runs" => runs = Some(map.next_value()?),
                        _ => return Err(serde::de::Error::custom("unknown raster field")),
                    }
                }
                let width: u32 = width.ok_or_else(|| serde::de::Error::missing_field("width"))?;
                let height: u32 = height.ok_or_else(|| serde::de::Error::missing_field("height"))?;
                let runs = runs.ok_or_else(|| serde::de::Error::missing_field("runs"))?;
                let mut data = Vec::with_capacity(width as usize * height as usize);
                for (v, n) in runs {
                    data.resize(data.len() + n as usize, v);
                }
                if data.len() != width as usize * height as usize {
                    return Err(serde::de::Error::custom("raster runs do not match dimensions"));
                }
                Ok(Raster { width, height, data })
            }
            fn visit_seq<A: SeqAccess<'de>>(self, _: A) -> Result<Raster, A::Error> {
                Err(serde::de::Error::custom("expected a map"))
            }
        }
        d.deserialize_struct("Raster", &["width", "height", "runs"], V)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadUserDetection {
    pub class: ObjectClass,
    /// Detection center pixel (u, v).
    pub center_px: [f64; 2],
    /// 2D box [u0, v0, u1, v1], clipped to the image.
    pub bbox_px: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraData {
    pub raster: Raster,
    pub detections: Vec<RoadUserDetection>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LidarPoint {
    #[serde(rename = "p")]
    pub pos: Vec3,
    #[serde(rename = "id")]
    pub label: OracleLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LidarData {
    pub points: Vec<LidarPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadarDetection {
    pub azimuth: f64,
    pub elevation: f64,
    pub range: f64,
    pub doppler: f64,
    #[serde(rename = "id")]
    pub label: OracleLabel,
}

impl RadarDetection {
    pub fn cartesian(&self) -> Vec3 {
        from_spherical(self.azimuth, self.elevation, self.range)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadarData {
    pub detections: Vec<RadarDetection>,
    pub bev_drivable: BevGrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub camera_ms: f64,
    pub lidar_ms: f64,
    pub radar_ms: f64,
}

impl Timestamps {
    pub fn skew_ms(&self, a: crate::pipeline::Sensor, b: crate::pipeline::Sensor) -> f64 {
        (self.of(a) - self.of(b)).abs()
    }

    fn of(&self, s: crate::pipeline::Sensor) -> f64 {
        use crate::pipeline::Sensor;
        match s {
            Sensor::Camera => self.camera_ms,
            Sensor::Lidar => self.lidar_ms,
            Sensor::Radar => self.radar_ms,
        }
    }
}

/// One time-synced camera/lidar/radar measurement trio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameBundle {
    pub frame_index: u64,
    pub timestamps_ms: Timestamps,
    pub camera: CameraData,
    pub lidar: LidarData,
    pub radar: RadarData,
}

struct MovedObject {
    class: ObjectClass,
    min: Vec3,
    max: Vec3,
    velocity: Vec3,
    id: u32,
}

fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Entry distance of a ray into an AABB, if it hits with s >= 0.
fn ray_box(origin: Vec3, dir: Vec3, min: Vec3, max: Vec3) -> Option<f64> {
    let mut tmin = 0.0f64;
    let mut tmax = f64::INFINITY;
    for k in 0..3 {
        if dir[k].abs() < 1e-12 {
            if origin[k] < min[k] || origin[k] > max[k] {
                return None;
            }
        } else {
            let inv = 1.0 / dir[k];
            let mut t0 = (min[k] - origin[k]) * inv;
            let mut t1 = (max[k] - origin[k]) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            tmin = tmin.max(t0);
            tmax = tmax.min(t1);
            if tmin > tmax {
                return None;
            }
        }
    }
    Some(tmin)
}

const CORNER_RETURN_OFFSETS: [Vec3; 14] = [
    [0.02, 0.0, 0.0],
    [-0.02, 0.0, 0.0],
    [0.0, 0.02, 0.0],
    [0.0, -0.02, 0.0],
    [0.0, 0.0, 0.02],
    [0.0, 0.0, -0.02],
    [0.015, 0.015, 0.015],
    [-0.015, -0.015, -0.015],
    [0.015, -0.015, 0.015],
    [-0.015, 0.015, -0.015],
    [0.015, 0.015, -0.015],
    [-0.015, -0.015, 0.015],
    [0.015, -0.015, -0.015],
    [-0.015, 0.015, 0.015],
];

/// Render the three sensors at `ego_time` seconds into the drive.
pub fn render_frame(
    scene: &SceneSpec,
    rig: &SensorRig,
    frame_index: u64,
    ego_time: f64,
) -> Result<FrameBundle, SimError> {
    rig.validate()?;
    scene.validate()?;
    let intr = &rig.intrinsics;

    // Scene snapshot in the ego frame at ego_time: objects advance by their
    // velocity, the ego advances along +x.
    let ego_shift = [scene.ego_velocity * ego_time, 0.0, 0.0];
    let mut boxes: Vec<MovedObject> = Vec::new();
    let mut corners: Vec<(u32, Vec3)> = Vec::new();
    for (i, o) in scene.objects.iter().enumerate() {
        let disp = sub(scale(o.velocity, ego_time), ego_shift);
        if o.class == ObjectClass::CornerTarget {
            corners.push((i as u32, add(o.min, disp)));
        } else {
            boxes.push(MovedObject {
                class: o.class,
                min: add(o.min, disp),
                max: add(o.max, disp),
                velocity: o.velocity,
                id: i as u32,
            });
        }
    }
    let polygon: Vec<[f64; 2]> = scene
        .drivable_polygon
        .iter()
        .map(|p| [p[0] - ego_shift[0], p[1] - ego_shift[1]])
        .collect();

    let ego_to_lidar = rig.ego_to_lidar();
    let ego_to_camera = rig.ego_to_camera();
    let ego_to_radar = rig.ego_to_radar();
    let lidar_to_ego = ego_to_lidar.inverse();
    let camera_to_ego = ego_to_camera.inverse();
    let radar_to_ego = ego_to_radar.inverse();
    let lidar_to_camera = rig.extrinsics.t_lidar_to_camera();
    let lidar_to_radar = rig.extrinsics.t_radar_to_lidar().inverse();
    let camera_origin = camera_to_ego.translation();
    let lidar_origin = lidar_to_ego.translation();
    let _radar_origin = radar_to_ego.translation();

    // ---- Camera raster -------------------------------------------------
    let width = intr.width as usize;
    let height = intr.height as usize;
    let cam_rot = camera_to_ego.rotation();
    let mut data = vec![PixelClass::Sky as u8; width * height];
    let mut zbuf = vec![f64::INFINITY; width * height];
    data.par_chunks_mut(width)
        .zip(zbuf.par_chunks_mut(width))
        .enumerate()
        .for_each(|(y, (row, zrow))| {
            for x in 0..width {
                let dx = (x as f64 + 0.5 - intr.cx) / intr.fx;
                let dy = (y as f64 + 0.5 - intr.cy) / intr.fy;
                let d_cam = normalize([dx, dy, 1.0]);
                let d = [
                    cam_rot[0][0] * d_cam[0] + cam_rot[0][1] * d_cam[1] + cam_rot[0][2] * d_cam[2],
                    cam_rot[1][0] * d_cam[0] + cam_rot[1][1] * d_cam[1] + cam_rot[1][2] * d_cam[2],
                    cam_rot[2][0] * d_cam[0] + cam_rot[2][1] * d_cam[1] + cam_rot[2][2] * d_cam[2],
                ];
                if d[2] < -1e-12 {
                    let s = -camera_origin[2] / d[2];
                    let hit = add(camera_origin, scale(d, s));
                    row[x] = if point_in_polygon([hit[0], hit[1]], &polygon) {
                        PixelClass::Drivable as u8
                    } else {
                        PixelClass::Other as u8
                    };
                    zrow[x] = s;
                }
            }
        });
    // Object pass: rasterize each box over its projected pixel rectangle.
    for b in &boxes {
        let mut u0 = f64::INFINITY;
        let mut v0 = f64::INFINITY;
        let mut u1 = f64::NEG_INFINITY;
        let mut v1 = f64::NEG_INFINITY;
        let mut any_front = false;
        for ci in 0..8 {
            let corner = [
                if ci & 1 == 0 { b.min[0] } else { b.max[0] },
                if ci & 2 == 0 { b.min[1] } else { b.max[1] },
                if ci & 4 == 0 { b.min[2] } else { b.max[2] },
            ];
            let pc = ego_to_camera.transform_point(corner);
            if pc[2] > 1e-9 {
                any_front = true;
                let u = intr.fx * pc[0] / pc[2] + intr.cx;
                let v = intr.fy * pc[1] / pc[2] + intr.cy;
                u0 = u0.min(u);
                v0 = v0.min(v);
                u1 = u1.max(u);
                v1 = v1.max(v);
            } else {
                // Behind the image plane: the silhouette may extend across
                // the whole image.
                u0 = 0.0;
                v0 = 0.0;
                u1 = width as f64;
                v1 = height as f64;
            }
        }
        if !any_front {
            continue;
        }
        let x0 = (u0.floor().max(0.0)) as usize;
        let y0 = (v0.floor().max(0.0)) as usize;
        let x1 = (u1.ceil().min(width as f64)) as usize;
        let y1 = (v1.ceil().min(height as f64)) as usize;
        for y in y0..y1 {
            for x in x0..x1 {
                let dx = (x as f64 + 0.5 - intr.cx) / intr.fx;
                let dy = (y as f64 + 0.5 - intr.cy) / intr.fy;
                let d_cam = normalize([dx, dy, 1.0]);
                let d = [
                    cam_rot[0][0] * d_cam[0] + cam_rot[0][1] * d_cam[1] + cam_rot[0][2] * d_cam[2],
                    cam_rot[1][0] * d_cam[0] + cam_rot[1][1] * d_cam[1] + cam_rot[1][2] * d_cam[2],
                    cam_rot[2][0] * d_cam[0] + cam_rot[2][1] * d_cam[1] + cam_rot[2][2] * d_cam[2],
                ];
                if let Some(s) = ray_box(camera_origin, d, b.min, b.max) {
                    let idx = y * width + x;
                    if s < zbuf[idx] {
                        zbuf[idx] = s;
                        data[idx] = b.class.pixel_class() as u8;
                    }
                }
            }
        }
    }
    let raster = Raster { width: intr.width, height: intr.height, data };

    // ---- Lidar ----------------------------------------------------------
    let n_az = (rig.lidar.fov_h_deg / rig.lidar.res_h_deg).round() as usize;
    let n_el = (rig.lidar.fov_v_deg / rig.lidar.res_v_deg).round() as usize;
    let lidar_rot = lidar_to_ego.rotation();
    let label_class = |label: OracleLabel| match label {
        OracleLabel::Ground { drivable } => {
            if drivable {
                PixelClass::Drivable
            } else {
                PixelClass::Other
            }
        }
        OracleLabel::Object(i) => scene.objects[i as usize].class.pixel_class(),
    };
    // Keep a return only when its ground-truth projection agrees with the
    // raster (corner targets are dimensionless and bypass the check).
    let consistent = |p_lidar: Vec3, label: OracleLabel| -> bool {
        if let OracleLabel::Object(i) = label {
            if scene.objects[i as usize].class == ObjectClass::CornerTarget {
                return true;
            }
        }
        let proj = intr.project(lidar_to_camera.transform_point(p_lidar));
        if !proj.in_fov {
            return true;
        }
        raster.class_at(proj.u, proj.v) == Some(label_class(label))
    };

    let mut exact_points: Vec<LidarPoint> = Vec::new();
    let mut noisy_points: Vec<LidarPoint> = Vec::new();
    let sigma = scene.noise.lidar_range_sigma;
    let rays: Vec<Option<(LidarPoint, f64)>> = (0..n_az * n_el)
        .into_par_iter()
        .map(|ray| {
            let ix = ray % n_az;
            let iy = ray / n_az;
            let az = (-rig.lidar.fov_h_deg / 2.0 + (ix as f64 + 0.5) * rig.lidar.res_h_deg)
                .to_radians();
            let el = (-rig.lidar.fov_v_deg / 2.0 + (iy as f64 + 0.5) * rig.lidar.res_v_deg)
                .to_radians();
            let d_l = from_spherical(az, el, 1.0);
            let d = [
                lidar_rot[0][0] * d_l[0] + lidar_rot[0][1] * d_l[1] + lidar_rot[0][2] * d_l[2],
                lidar_rot[1][0] * d_l[0] + lidar_rot[1][1] * d_l[1] + lidar_rot[1][2] * d_l[2],
                lidar_rot[2][0] * d_l[0] + lidar_rot[2][1] * d_l[1] + lidar_rot[2][2] * d_l[2],
            ];
            let mut best: Option<(f64, OracleLabel)> = None;
            if d[2] < -1e-12 {
                let s = -lidar_origin[2] / d[2];
                let hit = add(lidar_origin, scale(d, s));
                let drivable = point_in_polygon([hit[0], hit[1]], &polygon);
                best = Some((s, OracleLabel::Ground { drivable }));
            }
            for b in &boxes {
                if let Some(s) = ray_box(lidar_origin, d, b.min, b.max) {
                    if best.map_or(true, |(bs, _)| s < bs) {
                        best = Some((s, OracleLabel::Object(b.id)));
                    }
                }
            }
            let (s, label) = best?;
            if s < rig.min_range || s > rig.max_range {
                return None;
            }
            let noise = if sigma > 0.0 {
                Rng::stream(scene.seed, &[frame_index, STREAM_LIDAR, ray as u64]).normal(sigma)
            } else {
                0.0
            };
            Some((LidarPoint { pos: scale(d_l, s), label }, s + noise))
        })
        .collect();
    for entry in rays.iter().flatten() {
        let (exact, noisy_range) = entry;
        if consistent(exact.pos, exact.label) {
            exact_points.push(*exact);
        }
        if sigma == 0.0 {
            // Bit-identical to the exact cloud so oracle anchors match the
            // extracted features exactly.
            if consistent(exact.pos, exact.label) {
                noisy_points.push(*exact);
            }
        } else if *noisy_range >= rig.min_range && *noisy_range <= rig.max_range {
            let dir = normalize(exact.pos);
            let p = scale(dir, *noisy_range);
            if consistent(p, exact.label) {
                noisy_points.push(LidarPoint { pos: p, label: exact.label });
            }
        }
    }
    // Corner targets: a small symmetric bundle of returns.
    for (k, (id, p_ego)) in corners.iter().enumerate() {
        let p_l = ego_to_lidar.transform_point(*p_ego);
        let (az, el, r) = to_spherical(p_l);
        let half_h = (rig.lidar.fov_h_deg / 2.0).to_radians();
        let half_v = (rig.lidar.fov_v_deg / 2.0).to_radians();
        if az.abs() > half_h || el.abs() > half_v || r < rig.min_range || r > rig.max_range {
            continue;
        }
        for (j, off) in CORNER_RETURN_OFFSETS.iter().enumerate() {
            let base = add(p_l, *off);
            let label = OracleLabel::Object(*id);
            exact_points.push(LidarPoint { pos: base, label });
            let noise = if sigma > 0.0 {
                Rng::stream(
                    scene.seed,
                    &[frame_index, STREAM_LIDAR, (n_az * n_el + k * 8 + j) as u64],
                )
                .normal(sigma)
            } else {
                0.0
            };
            let dir = normalize(base);
            noisy_points.push(LidarPoint { pos: add(base, scale(dir, noise)), label });
        }
    }

    // ---- Oracle anchors over the sigma=0 cloud --------------------------
    // The anchor of an object is the centroid of the largest density
    // cluster among its sampled returns - exactly the centroid the feature
    // pipeline computes, so cross-modal anchors coincide bit-for-bit under
    // the ground-truth extrinsics.
    let exact_positions: Vec<Vec3> = exact_points.iter().map(|p| p.pos).collect();
    let selected = uniform_sample(&exact_positions, DEFAULT_SAMPLE_TARGET);
    let mut per_object: Vec<Vec<Vec3>> = vec![Vec::new(); scene.objects.len()];
    let mut bev = BevGrid::standard();
    for &si in &selected {
        let p = &exact_points[si];
        match p.label {
            OracleLabel::Object(i) => per_object[i as usize].push(p.pos),
            OracleLabel::Ground { .. } => {
                let pr = lidar_to_radar.transform_point(p.pos);
                bev.set_point(pr[0], pr[1]);
            }
        }
    }
    let cluster_params = crate::features::FeatureConfig::default().lidar_dbscan;
    let anchors: Vec<Option<Vec3>> = per_object
        .iter()
        .map(|pts| {
            if pts.is_empty() {
                return None;
            }
            let labels = crate::features::dbscan(pts, &cluster_params);
            let n_clusters = labels
                .iter()
                .filter_map(|l| match l {
                    crate::features::Label::Cluster(id) => Some(*id + 1),
                    crate::features::Label::Noise => None,
                })
                .max()
                .unwrap_or(0) as usize;
            if n_clusters == 0 {
                return None;
            }
            let mut sums: Vec<(Vec3, usize)> = vec![([0.0; 3], 0); n_clusters];
            for (p, l) in pts.iter().zip(&labels) {
                if let crate::features::Label::Cluster(id) = l {
                    let (s, c) = &mut sums[*id as usize];
                    *s = add(*s, *p);
                    *c += 1;
                }
            }
            let largest = (0..n_clusters)
                .max_by(|&a, &b| sums[a].1.cmp(&sums[b].1).then(b.cmp(&a)))
                .unwrap();
            let (s, c) = sums[largest];
            Some(scale(s, 1.0 / c as f64))
        })
        .collect();

    // ---- Radar ----------------------------------------------------------
    let half_h = (rig.lidar.fov_h_deg / 2.0).to_radians();
    let half_v = (rig.lidar.fov_v_deg / 2.0).to_radians();
    let sigma_az = scene.noise.radar_azimuth_sigma_deg.to_radians();
    let sigma_r = scene.noise.radar_range_sigma;
    let sigma_d = scene.noise.radar_doppler_sigma;
    let ego_vel = [scene.ego_velocity, 0.0, 0.0];
    let radar_rot_to_ego = radar_to_ego.rotation();
    let radar_to_camera = rig.extrinsics.t_camera_to_radar().inverse();
    let mut detections: Vec<RadarDetection> = Vec::new();
    let mut emit = |p_r: Vec3, vel: Vec3, label: OracleLabel, rng: &mut Rng| {
        let (az, el, r) = to_spherical(p_r);
        if az.abs() > half_h || el.abs() > half_v {
            return;
        }
        let dir_ego = {
            let d = normalize(p_r);
            [
                radar_rot_to_ego[0][0] * d[0] + radar_rot_to_ego[0][1] * d[1] + radar_rot_to_ego[0][2] * d[2],
                radar_rot_to_ego[1][0] * d[0] + radar_rot_to_ego[1][1] * d[1] + radar_rot_to_ego[1][2] * d[2],
                radar_rot_to_ego[2][0] * d[0] + radar_rot_to_ego[2][1] * d[1] + radar_rot_to_ego[2][2] * d[2],
            ]
        };
        let doppler = dot(sub(vel, ego_vel), dir_ego) + rng.normal(sigma_d);
        let az = az + rng.normal(sigma_az);
        let r = r + rng.normal(sigma_r);
        if az.abs() > half_h || r < rig.min_range || r > rig.max_range {
            return;
        }
        let det = RadarDetection { azimuth: az, elevation: el, range: r, doppler, label };
        // Consistency filter, mirroring the lidar one: a detection whose
        // ground-truth projection reads as sky (possible for noisy returns
        // off thin structures) is dropped, so the sky penalty is zero under
        // the true extrinsics.
        let proj = intr.project(radar_to_camera.transform_point(det.cartesian()));
        if proj.in_fov && raster.class_at(proj.u, proj.v) == Some(PixelClass::Sky) {
            return;
        }
        detections.push(det);
    };
    for b in &boxes {
        let anchor = match anchors[b.id as usize] {
            Some(a) => a,
            None => continue,
        };
        let p_r = lidar_to_radar.transform_point(anchor);
        let (az, el, r) = to_spherical(p_r);
        if az.abs() > half_h || el.abs() > half_v || r < rig.min_range || r > rig.max_range {
            continue;
        }
        // Lateral spread direction (horizontal, perpendicular to the line of
        // sight) and the box's support along it.
        let u_r = normalize(cross([0.0, 0.0, 1.0], normalize(p_r)));
        let u_ego = [
            radar_rot_to_ego[0][0] * u_r[0] + radar_rot_to_ego[0][1] * u_r[1] + radar_rot_to_ego[0][2] * u_r[2],
            radar_rot_to_ego[1][0] * u_r[0] + radar_rot_to_ego[1][1] * u_r[1] + radar_rot_to_ego[1][2] * u_r[2],
            radar_rot_to_ego[2][0] * u_r[0] + radar_rot_to_ego[2][1] * u_r[1] + radar_rot_to_ego[2][2] * u_r[2],
        ];
        let he = scale(sub(b.max, b.min), 0.5);
        let support = he[0] * u_ego[0].abs() + he[1] * u_ego[1].abs() + he[2] * u_ego[2].abs();
        let width_deg = (2.0 * support / r).to_degrees();
        let k = ((width_deg / rig.radar.res_h_deg).round() as usize).clamp(2, 12);
        // The symmetric pattern must stay inside the box (its projection
        // must land on the object's own silhouette), so the spread is capped
        // by the anchor's distance to the box boundary along +-u.
        let a_ego = lidar_to_ego.transform_point(anchor);
        let mut t_exit_pos = f64::INFINITY;
        let mut t_exit_neg = f64::INFINITY;
        for axis in 0..3 {
            if u_ego[axis].abs() > 1e-12 {
                let lo = (b.min[axis] - a_ego[axis]) / u_ego[axis];
                let hi = (b.max[axis] - a_ego[axis]) / u_ego[axis];
                let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
                t_exit_pos = t_exit_pos.min(hi);
                t_exit_neg = t_exit_neg.min(-lo);
            }
        }
        let half_spread = 0.8 * t_exit_pos.min(t_exit_neg).max(0.0).min(0.5 * support);
        let mut rng = Rng::stream(scene.seed, &[frame_index, STREAM_RADAR, b.id as u64]);
        for i in 0..k {
            let off = (i as f64 - (k as f64 - 1.0) / 2.0) * (2.0 * half_spread / (k as f64 - 1.0));
            emit(add(p_r, scale(u_r, off)), b.velocity, OracleLabel::Object(b.id), &mut rng);
        }
    }
    for (id, p_ego) in &corners {
        let p_r = ego_to_radar.transform_point(*p_ego);
        let (_, _, r) = to_spherical(p_r);
        if r < rig.min_range || r > rig.max_range {
            continue;
        }
        let mut rng = Rng::stream(scene.seed, &[frame_index, STREAM_RADAR, 0xC0 + *id as u64]);
        emit(p_r, [0.0; 3], OracleLabel::Object(*id), &mut rng);
    }

    // ---- Camera road-user detections ------------------------------------
    let mut cam_detections: Vec<RoadUserDetection> = Vec::new();
    for b in &boxes {
        if !b.class.is_road_user() {
            continue;
        }
        let anchor = match anchors[b.id as usize] {
            Some(a) => a,
            None => continue,
        };
        let center = intr.project(lidar_to_camera.transform_point(anchor));
        if !center.in_fov {
            continue;
        }
        let mut u0 = f64::INFINITY;
        let mut v0 = f64::INFINITY;
        let mut u1 = f64::NEG_INFINITY;
        let mut v1 = f64::NEG_INFINITY;
        for ci in 0..8 {
            let corner = [
                if ci & 1 == 0 { b.min[0] } else { b.max[0] },
                if ci & 2 == 0 { b.min[1] } else { b.max[1] },
                if ci & 4 == 0 { b.min[2] } else { b.max[2] },
            ];
            let pc = ego_to_camera.transform_point(corner);
            if pc[2] > 1e-9 {
                let u = intr.fx * pc[0] / pc[2] + intr.cx;
                let v = intr.fy * pc[1] / pc[2] + intr.cy;
                u0 = u0.min(u);
                v0 = v0.min(v);
                u1 = u1.max(u);
                v1 = v1.max(v);
            }
        }
        if !u0.is_finite() {
            continue;
        }
        cam_detections.push(RoadUserDetection {
            class: b.class,
            center_px: [center.u, center.v],
            bbox_px: [
                u0.max(0.0),
                v0.max(0.0),
                u1.min(intr.width as f64),
                v1.min(intr.height as f64),
            ],
        });
    }

    // ---- Timestamps -------------------------------------------------------
    let base_ms = ego_time * 1000.0;
    let jitter = scene.noise.timestamp_jitter_ms;
    let ts = |k: u64| {
        if jitter > 0.0 {
            base_ms + Rng::stream(scene.seed, &[frame_index, STREAM_TIMESTAMP, k]).normal(jitter)
        } else {
            base_ms
        }
    };
    let timestamps_ms = Timestamps { camera_ms: ts(0), lidar_ms: ts(1), radar_ms: ts(2) };

    Ok(FrameBundle {
        frame_index,
        timestamps_ms,
        camera: CameraData { raster, detections: cam_detections },
        lidar: LidarData { points: noisy_points },
        radar: RadarData { detections, bev_drivable: bev },
    })
}
