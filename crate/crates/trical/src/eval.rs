//! Controlled-target evaluation: pairwise and closed-loop alignment errors
//! against trihedral corner reflectors with known (pinned) positions.
//!
//! Camera-paired errors are measured pixelwise and converted to azimuth /
//! elevation angles; lidar-radar and closed-loop errors are measured in
//! spherical coordinates (azimuth about +z, elevation from the x-y plane,
//! range).

use crate::geometry::{
    to_spherical, CalibrationState, CameraIntrinsics, RigidTransform, Vec3,
};
use crate::losses::Pair;
use crate::simworld::{SceneSpec, SensorRig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset contains no corner targets")]
    NoCorners,
    #[error("every corner sample was excluded (behind the camera)")]
    AllSamplesExcluded,
    #[error("malformed report CSV: {0}")]
    CsvParse(String),
}

/// One corner's pinned position in every sensor frame.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CornerPin {
    pub lidar: Vec3,
    pub radar: Vec3,
    pub camera_px: [f64; 2],
}

/// Pinned corner observations plus the number of (identical) recorded frames.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CornerObservation {
    pub corners: Vec<CornerPin>,
    pub frame_count: usize,
}

pub const DEFAULT_FRAME_COUNT: usize = 150;

/// Pin corner positions in each sensor frame from the scene's ground truth.
pub fn pin_corners(scene: &SceneSpec, rig: &SensorRig) -> Result<CornerObservation, EvalError> {
    let corners = scene.corners();
    if corners.is_empty() {
        return Err(EvalError::NoCorners);
    }
    let to_lidar = rig.ego_to_lidar();
    let to_radar = rig.ego_to_radar();
    let to_camera = rig.ego_to_camera();
    let pins = corners
        .iter()
        .map(|&p| {
            let proj = rig.intrinsics.project(to_camera.transform_point(p));
            CornerPin {
                lidar: to_lidar.transform_point(p),
                radar: to_radar.transform_point(p),
                camera_px: [proj.u, proj.v],
            }
        })
        .collect();
    Ok(CornerObservation { corners: pins, frame_count: DEFAULT_FRAME_COUNT })
}

/// Mean absolute pairwise alignment errors for one sensor pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairError {
    pub az_deg: f64,
    pub el_deg: f64,
    /// Absent for camera-paired errors (no range in the image plane).
    pub range_m: Option<f64>,
    pub n_samples: usize,
    /// Corner samples excluded because they fell behind the camera.
    pub excluded: usize,
}

/// Alignment error of an estimated pair transform against the pinned corners.
///
/// Camera pairs: project the source sensor's corner with the estimated
/// transform and compare pixel positions, converted to angles. Lidar-radar:
/// carry the radar corner into the lidar frame and compare spherical
/// coordinates.
pub fn corner_pair_error(
    obs: &CornerObservation,
    estimated: &RigidTransform,
    pair: Pair,
    intr: &CameraIntrinsics,
) -> Result<PairError, EvalError> {
    let mut az_sum = 0.0;
    let mut el_sum = 0.0;
    let mut r_sum = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for pin in &obs.corners {
        match pair {
            Pair::CameraLidar | Pair::CameraRadar => {
                let src = if pair == Pair::CameraLidar { pin.lidar } else { pin.radar };
                let p_cam = estimated.transform_point(src);
                if p_cam[2] <= 0.0 {
                    excluded += 1;
                    continue;
                }
                let u = intr.fx * p_cam[0] / p_cam[2] + intr.cx;
                let v = intr.fy * p_cam[1] / p_cam[2] + intr.cy;
                let (az_est, el_est) = intr.pixel_to_angles(u, v);
                let (az_pin, el_pin) = intr.pixel_to_angles(pin.camera_px[0], pin.camera_px[1]);
                az_sum += (az_est - az_pin).abs();
                el_sum += (el_est - el_pin).abs();
                used += 1;
            }
            Pair::LidarRadar => {
                let p = estimated.transform_point(pin.radar);
                let (az_e, el_e, r_e) = to_spherical(p);
                let (az_p, el_p, r_p) = to_spherical(pin.lidar);
                az_sum += (az_e - az_p).abs();
                el_sum += (el_e - el_p).abs();
                r_sum += (r_e - r_p).abs();
                used += 1;
            }
        }
    }
    if used == 0 {
        return Err(EvalError::AllSamplesExcluded);
    }
    let n = used as f64;
    Ok(PairError {
        az_deg: (az_sum / n).to_degrees(),
        el_deg: (el_sum / n).to_degrees(),
        range_m: if pair == Pair::LidarRadar { Some(r_sum / n) } else { None },
        n_samples: used * obs.frame_count,
        excluded: excluded * obs.frame_count,
    })
}

/// Closed-loop residual: carry each lidar-frame corner around the full
/// sensor cycle (lidar -> camera -> radar -> lidar) and compare spherical
/// coordinates against the original point.
pub fn closed_loop_error(state: &CalibrationState, obs: &CornerObservation) -> PairError {
    let cycle = state
        .t_radar_to_lidar()
        .compose(&state.t_camera_to_radar())
        .compose(&state.t_lidar_to_camera());
    let mut az_sum = 0.0;
    let mut el_sum = 0.0;
    let mut r_sum = 0.0;
    for pin in &obs.corners {
        let p = cycle.transform_point(pin.lidar);
        let (az_e, el_e, r_e) = to_spherical(p);
        let (az_p, el_p, r_p) = to_spherical(pin.lidar);
        az_sum += (az_e - az_p).abs();
        el_sum += (el_e - el_p).abs();
        r_sum += (r_e - r_p).abs();
    }
    let n = obs.corners.len() as f64;
    PairError {
        az_deg: (az_sum / n).to_degrees(),
        el_deg: (el_sum / n).to_degrees(),
        range_m: Some(r_sum / n),
        n_samples: obs.corners.len() * obs.frame_count,
        excluded: 0,
    }
}

pub const GLOBAL_LABEL: &str = "global";

/// One row of the error report: a (configuration, pair) cell triple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub config: String,
    /// "camera-lidar" | "camera-radar" | "lidar-radar" | "global".
    pub pair: String,
    pub az_deg: f64,
    pub el_deg: f64,
    pub range_m: Option<f64>,
    pub n_samples: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rows: Vec<ReportRow>,
}

/// Evaluate one calibration state against the corner observations: all three
/// pairwise rows plus the closed-loop global row.
pub fn evaluate_state(
    state: &CalibrationState,
    obs: &CornerObservation,
    intr: &CameraIntrinsics,
    config: &str,
) -> Result<ErrorReport, EvalError> {
    let mut rows = Vec::with_capacity(4);
    for pair in crate::losses::ALL_PAIRS {
        let transform = match pair {
            Pair::CameraLidar => state.t_lidar_to_camera(),
            Pair::CameraRadar => state.t_radar_to_camera(),
            Pair::LidarRadar => state.t_radar_to_lidar(),
        };
        let err = corner_pair_error(obs, &transform, pair, intr)?;
        rows.push(ReportRow {
            config: config.to_string(),
            pair: pair.label().to_string(),
            az_deg: err.az_deg,
            el_deg: err.el_deg,
            range_m: err.range_m,
            n_samples: err.n_samples,
        });
    }
    let global = closed_loop_error(state, obs);
    rows.push(ReportRow {
        config: config.to_string(),
        pair: GLOBAL_LABEL.to_string(),
        az_deg: global.az_deg,
        el_deg: global.el_deg,
        range_m: global.range_m,
        n_samples: global.n_samples,
    });
    Ok(ErrorReport { rows })
}

/// Concatenate reports in the given order (e.g. pairwise rows before joint
/// rows).
pub fn merge_reports(reports: &[ErrorReport]) -> ErrorReport {
    ErrorReport {
        rows: reports.iter().flat_map(|r| r.rows.iter().cloned()).collect(),
    }
}

impl ErrorReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("config,pair,az_deg,el_deg,range_m,n_samples\n");
        for r in &self.rows {
            let range = match r.range_m {
                Some(v) => format!("{v}"),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.config, r.pair, r.az_deg, r.el_deg, range, r.n_samples
            ));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<ErrorReport, EvalError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| EvalError::CsvParse("empty".into()))?;
        if header != "config,pair,az_deg,el_deg,range_m,n_samples" {
            return Err(EvalError::CsvParse(format!("bad header: {header}")));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 6 {
                return Err(EvalError::CsvParse(format!("line {}: wrong arity", i + 2)));
            }
            let parse = |s: &str| -> Result<f64, EvalError> {
                s.parse().map_err(|_| EvalError::CsvParse(format!("bad number: {s}")))
            };
            rows.push(ReportRow {
                config: parts[0].to_string(),
                pair: parts[1].to_string(),
                az_deg: parse(parts[2])?,
                el_deg: parse(parts[3])?,
                range_m: if parts[4] == "-" { None } else { Some(parse(parts[4])?) },
                n_samples: parts[5]
                    .parse()
                    .map_err(|_| EvalError::CsvParse(format!("bad count: {}", parts[5])))?,
            });
        }
        Ok(ErrorReport { rows })
    }

    /// Aligned text table: one row per configuration, Az/El/R columns per
    /// pair plus the global closed loop. Camera-pair range cells render "-";
    /// pairs never evaluated render "n/a".
    pub fn to_text_table(&self) -> String {
        let pairs = ["camera-lidar", "camera-radar", "lidar-radar", GLOBAL_LABEL];
        let mut configs: Vec<String> = Vec::new();
        for r in &self.rows {
            if !configs.contains(&r.config) {
                configs.push(r.config.clone());
            }
        }
        let cell = |config: &str, pair: &str| -> [String; 3] {
            match self.rows.iter().find(|r| r.config == config && r.pair == pair) {
                Some(r) => [
                    format!("{:.3}", r.az_deg),
                    format!("{:.3}", r.el_deg),
                    match r.range_m {
                        Some(v) => format!("{v:.3}"),
                        None => "-".to_string(),
                    },
                ],
                None => ["n/a".to_string(), "n/a".to_string(), "n/a".to_string()],
            }
        };
        let config_w = configs
            .iter()
            .map(|c| c.len())
            .chain(["config".len()])
            .max()
            .unwrap();
        let mut out = String::new();
        out.push_str(&format!("{:<config_w$}", "config"));
        for p in pairs {
            out.push_str(&format!(" | {:^26}", p));
        }
        out.push('\n');
        out.push_str(&format!("{:<config_w$}", ""));
        for _ in pairs {
            out.push_str(&format!(
                " | {:>8} {:>8} {:>8}",
                "az[deg]", "el[deg]", "r[m]"
            ));
        }
        out.push('\n');
        for c in &configs {
            out.push_str(&format!("{c:<config_w$}"));
            for p in pairs {
                let [az, el, r] = cell(c, p);
                out.push_str(&format!(" | {az:>8} {el:>8} {r:>8}"));
            }
            out.push('\n');
        }
        out
    }

    /// Simple static bar chart of azimuth/elevation errors per configuration
    /// and pair.
    pub fn to_svg(&self) -> String {
        let bar_w = 18.0;
        let group_gap = 26.0;
        let height = 260.0;
        let plot_h = 190.0;
        let max_val = self
            .rows
            .iter()
            .map(|r| r.az_deg.max(r.el_deg))
            .fold(0.01f64, f64::max);
        let n = self.rows.len() as f64;
        let width = 70.0 + n * (2.0 * bar_w + group_gap);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" \
             viewBox=\"0 0 {:.0} {:.0}\">\n",
            width, height, width, height
        );
        svg.push_str(&format!(
            "<text x=\"8\" y=\"16\" font-size=\"12\">alignment error [deg], max {:.3}</text>\n",
            max_val
        ));
        let base_y = 30.0 + plot_h;
        svg.push_str(&format!(
            "<line x1=\"40\" y1=\"{base_y}\" x2=\"{:.0}\" y2=\"{base_y}\" stroke=\"black\"/>\n",
            width - 10.0
        ));
        for (i, r) in self.rows.iter().enumerate() {
            let x0 = 50.0 + i as f64 * (2.0 * bar_w + group_gap);
            let h_az = plot_h * r.az_deg / max_val;
            let h_el = plot_h * r.el_deg / max_val;
            svg.push_str(&format!(
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{bar_w}\" height=\"{:.1}\" fill=\"#4477aa\"/>\n",
                x0,
                base_y - h_az,
                h_az
            ));
            svg.push_str(&format!(
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{bar_w}\" height=\"{:.1}\" fill=\"#ee6677\"/>\n",
                x0 + bar_w,
                base_y - h_el,
                h_el
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"9\" transform=\"rotate(40 {:.1} {:.1})\">{} {}</text>\n",
                x0,
                base_y + 12.0,
                x0,
                base_y + 12.0,
                r.config,
                r.pair
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }
}
