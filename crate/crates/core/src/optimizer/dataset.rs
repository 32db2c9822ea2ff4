//! Posed image sets in the NeRF `transforms_*.json` layout.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assets::io::{read_hdr, read_png};
use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::integrator::unflatten;
use crate::math::{srgb_decode, Rgb, Vec3};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransformsFile {
    /// Horizontal field of view in radians.
    pub camera_angle_x: f64,
    pub frames: Vec<FrameEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrameEntry {
    /// Image path relative to the dataset directory; the extension may be
    /// omitted, in which case `.hdr` then `.png` are tried.
    pub file_path: String,
    /// Camera-to-world matrix, row-major.
    pub transform_matrix: [[f64; 4]; 4],
}

/// One posed ground-truth image.
#[derive(Clone, Debug)]
pub struct View {
    pub name: String,
    pub camera: Camera,
    pub image: Vec<Rgb>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub train: Vec<View>,
    pub test: Vec<View>,
    pub width: usize,
    pub height: usize,
}

fn resolve_image(dir: &Path, file_path: &str) -> Result<PathBuf> {
    let base = dir.join(file_path);
    if base.extension().is_some() && base.is_file() {
        return Ok(base);
    }
    for ext in ["hdr", "png"] {
        let p = PathBuf::from(format!("{}.{ext}", base.display()));
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::Data(format!("dataset image {} not found", base.display())))
}

/// Linear RGB of an `.hdr` file, or of an sRGB-encoded PNG.
pub fn read_image(path: &Path) -> Result<(usize, usize, Vec<Rgb>)> {
    let is_hdr = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("hdr"));
    if is_hdr {
        let (w, h, data) = read_hdr(path)?;
        return Ok((w, h, unflatten(&data)));
    }
    let (w, h, c, data) = read_png(path)?;
    let px = data
        .chunks_exact(c)
        .map(|t| {
            let g = |i: usize| srgb_decode(t[i.min(c - 1)] as f64);
            if c == 1 {
                Vec3::splat(g(0))
            } else {
                Vec3::new(g(0), g(1), g(2))
            }
        })
        .collect();
    Ok((w, h, px))
}

fn load_split(dir: &Path, file: &str) -> Result<Vec<View>> {
    let path = dir.join(file);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let tf: TransformsFile =
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    tf.frames
        .iter()
        .map(|f| {
            let img_path = resolve_image(dir, &f.file_path)?;
            let (w, h, image) = read_image(&img_path)?;
            let camera = Camera::from_matrix(f.transform_matrix, tf.camera_angle_x, w, h)
                .map_err(|e| Error::Data(format!("{}: {}: {e}", path.display(), f.file_path)))?;
            Ok(View { name: f.file_path.clone(), camera, image })
        })
        .collect()
}

impl Dataset {
    /// Reads `transforms_train.json` and, when present, `transforms_test.json`.
    pub fn load(dir: &Path) -> Result<Self> {
        let train = load_split(dir, "transforms_train.json")?;
        let test = if dir.join("transforms_test.json").is_file() { load_split(dir, "transforms_test.json")? } else { Vec::new() };
        let first = train.first().ok_or_else(|| Error::Data(format!("{}: no training views", dir.display())))?;
        let (width, height) = (first.camera.width, first.camera.height);
        if let Some(v) = train.iter().chain(&test).find(|v| (v.camera.width, v.camera.height) != (width, height)) {
            return Err(Error::Data(format!(
                "{}: image {} is {}x{}, expected {width}x{height}",
                dir.display(),
                v.name,
                v.camera.width,
                v.camera.height
            )));
        }
        Ok(Self { train, test, width, height })
    }
}
