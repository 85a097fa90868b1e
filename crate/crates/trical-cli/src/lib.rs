//! Library surface of the `trical` command-line driver: config parsing plus
//! the four command implementations (`simulate`, `calibrate`, `evaluate`,
//! `report`), kept callable for integration tests.

pub mod config;

pub use config::{RunConfig, CONFIG_REFERENCE};

use anyhow::{anyhow, bail, Context, Result};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use trical::eval::{self, ErrorReport};
use trical::features::extract_sequence;
use trical::geometry::CalibrationState;
use trical::losses::{self, PairValidity};
use trical::pipeline::{self, SceneContext, StateDegrees};
use trical::simworld::{
    self, corner_lot_scene, generate_scene, perturb_rig, read_dataset, simulate_drive,
    write_dataset, Manifest, SceneKind, SceneSpec, SensorRig, DEFAULT_CORNERS, FORMAT_VERSION,
};

/// Summary of a `simulate` run.
#[derive(Debug)]
pub struct SimulateSummary {
    pub dataset_dir: PathBuf,
    pub frames: usize,
    /// Valid-frame counts per pair (camera-lidar, camera-radar, lidar-radar).
    pub valid_counts: [usize; 3],
}

fn build_scene(cfg: &RunConfig) -> Result<SceneSpec> {
    let kind = cfg.scene_kind()?;
    let mut scene = match kind {
        SceneKind::CornerLot => {
            let corners = cfg.scene.corners.clone().unwrap_or(DEFAULT_CORNERS.to_vec());
            corner_lot_scene(&corners, cfg.seed)
        }
        k => {
            let mut s = generate_scene(k, cfg.seed);
            if let Some(corners) = &cfg.scene.corners {
                for &c in corners {
                    s.objects.push(simworld::SceneObject {
                        class: simworld::ObjectClass::CornerTarget,
                        min: c,
                        max: c,
                        velocity: [0.0; 3],
                    });
                }
            }
            s
        }
    };
    scene.noise = cfg.noise_params();
    Ok(scene)
}

/// Render a drive to a dataset directory.
pub fn run_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<SimulateSummary> {
    cfg.validate()?;
    let scene = build_scene(cfg)?;
    let rig = SensorRig::standard();
    let frames = simulate_drive(&scene, &rig, cfg.drive.frames, cfg.drive.dt)
        .map_err(|e| anyhow!(e))?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        scene: scene.clone(),
        rig: rig.clone(),
        n_frames: frames.len(),
        dt: cfg.drive.dt,
    };
    write_dataset(out_dir, &manifest, &frames).context("writing dataset")?;

    let feats = extract_sequence(&frames, &cfg.feature_config(), scene.ego_velocity);
    let criteria = cfg.pipeline_config()?.criteria;
    let mut valid_counts = [0usize; 3];
    for (bundle, fs) in frames.iter().zip(&feats) {
        let v = pipeline::pair_validity(bundle, fs, &criteria);
        valid_counts[0] += v.camera_lidar as usize;
        valid_counts[1] += v.camera_radar as usize;
        valid_counts[2] += v.lidar_radar as usize;
    }
    Ok(SimulateSummary { dataset_dir: out_dir.to_path_buf(), frames: frames.len(), valid_counts })
}

/// Outcome of a `calibrate` run.
#[derive(Debug)]
pub struct CalibrateOutcome {
    pub final_state: CalibrationState,
    pub events: usize,
    pub insufficient_samples: bool,
    pub state_path: PathBuf,
    pub events_path: PathBuf,
}

/// Run the continuous pipeline over a dataset. The initial calibration state
/// is the rig ground truth de-calibrated by the configured perturbation.
pub fn run_calibrate(
    cfg: &RunConfig,
    dataset: &Path,
    out_dir: &Path,
    dump_losses: bool,
) -> Result<CalibrateOutcome> {
    cfg.validate()?;
    let (manifest, frames) = read_dataset(dataset).context("reading dataset")?;
    let ctx = SceneContext::new(&manifest.scene, &manifest.rig);
    let (perturbed, _) = perturb_rig(&manifest.rig, &cfg.perturbation_spec());
    let init = perturbed.extrinsics;
    let pipe_cfg = cfg.pipeline_config()?;
    let outcome = pipeline::run_pipeline(frames.clone(), &ctx, &init, &pipe_cfg)
        .map_err(|e| anyhow!(e))?;

    fs::create_dir_all(out_dir).context("creating output directory")?;
    let state_path = out_dir.join("state.json");
    let state_deg: StateDegrees = outcome.final_state.into();
    fs::write(&state_path, serde_json::to_string_pretty(&state_deg)? + "\n")?;
    let events_path = out_dir.join("events.jsonl");
    let mut f = fs::File::create(&events_path)?;
    for event in &outcome.events {
        writeln!(f, "{}", serde_json::to_string(event)?)?;
    }
    if dump_losses {
        let feats = extract_sequence(&frames, &cfg.feature_config(), manifest.scene.ego_velocity);
        let refs: Vec<&trical::features::FeatureSet> = feats.iter().collect();
        let validities: Vec<PairValidity> = frames
            .iter()
            .zip(&feats)
            .map(|(b, fs)| pipeline::pair_validity(b, fs, &pipe_cfg.criteria))
            .collect();
        let weights = cfg.loss_weights();
        let pairwise = losses::loss_pairwise_total(
            &refs,
            Some(&validities),
            &outcome.final_state,
            &manifest.rig.intrinsics,
            &weights,
            &pipe_cfg.pair_mask,
        )
        .map_err(|e| anyhow!(e))?;
        let report = losses::LossReport::build(
            &pairwise,
            losses::loss_global(&outcome.final_state, &weights),
            pipe_cfg.mode,
        );
        fs::write(out_dir.join("losses.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(CalibrateOutcome {
        final_state: outcome.final_state,
        events: outcome.events.len(),
        insufficient_samples: outcome.insufficient_samples,
        state_path,
        events_path,
    })
}

/// Load a calibration state file written by `calibrate` (degrees/meters).
pub fn load_state(path: &Path) -> Result<CalibrationState> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading state file {}", path.display()))?;
    let deg: StateDegrees = serde_json::from_str(&text)
        .with_context(|| format!("parsing state file {}", path.display()))?;
    Ok(deg.into())
}

/// Evaluate one or more calibration states against a corner dataset; emits
/// CSV, aligned text table and an SVG chart. Rows keep the argument order.
pub fn run_evaluate(
    dataset: &Path,
    state_files: &[PathBuf],
    out_dir: &Path,
) -> Result<ErrorReport> {
    let (manifest, _) = read_dataset(dataset).context("reading dataset")?;
    let obs = eval::pin_corners(&manifest.scene, &manifest.rig).map_err(|e| anyhow!(e))?;
    // Validate every input before writing anything.
    let mut evaluated: Vec<ErrorReport> = Vec::new();
    for path in state_files {
        let state = load_state(path)?;
        let config = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "state".into());
        evaluated.push(
            eval::evaluate_state(&state, &obs, &manifest.rig.intrinsics, &config)
                .map_err(|e| anyhow!(e))?,
        );
    }
    let report = eval::merge_reports(&evaluated);
    write_report_artifacts(&report, out_dir)?;
    Ok(report)
}

/// Merge previously written report CSVs into combined artifacts.
pub fn run_report(inputs: &[PathBuf], out_dir: &Path) -> Result<ErrorReport> {
    if inputs.is_empty() {
        bail!("report needs at least one CSV input");
    }
    let mut parts = Vec::new();
    for path in inputs {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading report {}", path.display()))?;
        parts.push(ErrorReport::parse_csv(&text).map_err(|e| anyhow!(e))?);
    }
    let report = eval::merge_reports(&parts);
    write_report_artifacts(&report, out_dir)?;
    Ok(report)
}

fn write_report_artifacts(report: &ErrorReport, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).context("creating output directory")?;
    fs::write(out_dir.join("report.csv"), report.to_csv())?;
    fs::write(out_dir.join("report.txt"), report.to_text_table())?;
    fs::write(out_dir.join("report.svg"), report.to_svg())?;
    Ok(())
}
