//! On-disk drive datasets.
//!
//! One directory per drive: `manifest.json` (scene spec, rig, frame count,
//! frame period) plus `frame_<idx>.json` files, each holding one
//! [`FrameBundle`] with the camera raster run-length encoded. Output is
//! byte-stable across runs for a fixed seed.

use super::{FrameBundle, SceneSpec, SensorRig};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error in {path}: {source}")]
    Schema {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported dataset format version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub scene: SceneSpec,
    pub rig: SensorRig,
    pub n_frames: usize,
    pub dt: f64,
}

fn io_err(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io { path: path.display().to_string(), source }
}

fn schema_err(path: &Path, source: serde_json::Error) -> DatasetError {
    DatasetError::Schema { path: path.display().to_string(), source }
}

pub fn write_dataset(
    dir: &Path,
    manifest: &Manifest,
    frames: &[FrameBundle],
) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let manifest_path = dir.join("manifest.json");
    let mut f = fs::File::create(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    serde_json::to_writer_pretty(&mut f, manifest).map_err(|e| schema_err(&manifest_path, e))?;
    f.write_all(b"\n").map_err(|e| io_err(&manifest_path, e))?;
    for frame in frames {
        let path = dir.join(format!("frame_{}.json", frame.frame_index));
        let f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut w = std::io::BufWriter::new(f);
        serde_json::to_writer(&mut w, frame).map_err(|e| schema_err(&path, e))?;
        w.flush().map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<(Manifest, Vec<FrameBundle>), DatasetError> {
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| schema_err(&manifest_path, e))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(DatasetError::Version(manifest.format_version));
    }
    let mut frames = Vec::with_capacity(manifest.n_frames);
    for idx in 0..manifest.n_frames {
        let path = dir.join(format!("frame_{idx}.json"));
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        frames.push(serde_json::from_str(&text).map_err(|e| schema_err(&path, e))?);
    }
    Ok((manifest, frames))
}

#[cfg(test)]
mod tests {
    use super::super::{generate_scene, render_frame, SceneKind, SensorRig};
    use super::*;

    #[test]
    fn roundtrip_and_byte_stability() {
        let mut scene = generate_scene(SceneKind::Urban, 5);
        scene.noise = super::super::NoiseParams::default();
        let rig = SensorRig::standard();
        let frames = vec![render_frame(&scene, &rig, 0, 0.0).unwrap()];
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            scene,
            rig,
            n_frames: 1,
            dt: 0.1,
        };
        let dir_a = std::env::temp_dir().join(format!("trical_ds_a_{}", std::process::id()));
        let dir_b = std::env::temp_dir().join(format!("trical_ds_b_{}", std::process::id()));
        write_dataset(&dir_a, &manifest, &frames).unwrap();
        write_dataset(&dir_b, &manifest, &frames).unwrap();
        let a = std::fs::read(dir_a.join("frame_0.json")).unwrap();
        let b = std::fs::read(dir_b.join("frame_0.json")).unwrap();
        assert_eq!(a, b);
        let (m2, f2) = read_dataset(&dir_a).unwrap();
        assert_eq!(m2.n_frames, 1);
        assert!(f2[0] == frames[0], "frame roundtrip mismatch");
        std::fs::remove_dir_all(&dir_a).ok();
        std::fs::remove_dir_all(&dir_b).ok();
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let scene = generate_scene(SceneKind::Urban, 5);
        let rig = SensorRig::standard();
        let manifest = Manifest {
            format_version: 99,
            scene,
            rig,
            n_frames: 0,
            dt: 0.1,
        };
        let dir = std::env::temp_dir().join(format!("trical_ds_v_{}", std::process::id()));
        write_dataset(&dir, &manifest, &[]).unwrap();
        assert!(matches!(read_dataset(&dir), Err(DatasetError::Version(99))));
        std::fs::remove_dir_all(&dir).ok();
    }
}
