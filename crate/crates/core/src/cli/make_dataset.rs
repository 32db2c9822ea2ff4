use std::path::Path;

use crate::assets::io::write_hdr;
use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::integrator::{flatten, render, RenderConfig};
use crate::math::{Vec3, PI};
use crate::optimizer::{FrameEntry, TransformsFile};
use crate::sampling::Rng;
use crate::scene_desc::Scene;

/// How views are placed and rendered.
#[derive(Clone, Debug)]
pub struct DatasetOptions {
    pub views: usize,
    pub spp: u32,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view in radians.
    pub fov_x: f64,
    pub depth: u32,
    /// Elevation band above the horizon, as cosines of the polar angle.
    pub min_cos: f64,
    pub max_cos: f64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self { views: 12, spp: 256, seed: 0, width: 64, height: 64, fov_x: 0.7, depth: 3, min_cos: 0.35, max_cos: 0.95 }
    }
}

/// Every third view goes to the test split.
pub fn is_test_view(i: usize) -> bool {
    i % 3 == 2
}

/// Cameras on a Fibonacci lattice over the upper hemisphere (about `up`)
/// around the scene bounds, all looking at the bounds center.
pub fn dataset_cameras(scene: &Scene, opts: &DatasetOptions) -> Result<Vec<Camera>> {
    let b = scene.geometry.bounds().ok_or_else(|| Error::Data("scene has no geometry".into()))?;
    let center = (b.min + b.max) * 0.5;
    let radius = 0.5 * b.diagonal().max(1e-6);
    let dist = 1.15 * radius / (0.5 * opts.fov_x).tan();
    let up = scene.cameras.first().map_or(Vec3::Y, |c| Vec3::new(c.to_world[0][1], c.to_world[1][1], c.to_world[2][1]));
    let frame = crate::math::Frame::from_normal(up.normalize());
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..opts.views)
        .map(|i| {
            let t = (i as f64 + 0.5) / opts.views as f64;
            let cos_t = opts.max_cos + (opts.min_cos - opts.max_cos) * t;
            let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
            let phi = golden * i as f64;
            let local = Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t);
            let eye = center + frame.to_world(local) * dist;
            Camera::look_at(eye, center, up, opts.fov_x, opts.width, opts.height)
        })
        .collect()
}

/// Renders ground-truth views and writes `train/`, `test/` and the two
/// transforms files under `out`. Returns `(train, test)` counts.
pub fn make_dataset(scene: &Scene, opts: &DatasetOptions, out: &Path) -> Result<(usize, usize)> {
    if opts.views == 0 {
        return Err(Error::Data("make-dataset needs at least one view".into()));
    }
    let cfg = RenderConfig { spp: opts.spp, depth: opts.depth, adaptive: false, ..RenderConfig::default() };
    cfg.validate()?;
    for sub in ["train", "test"] {
        let d = out.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let cameras = dataset_cameras(scene, opts)?;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, cam) in cameras.iter().enumerate() {
        let split = if is_test_view(i) { "test" } else { "train" };
        let rel = format!("{split}/r_{i}.hdr");
        let img = render(&scene.geometry, &scene.params, cam, &cfg, Rng::derive(opts.seed, &[i as u64]).seed())?;
        if !img.radiance.iter().all(|p| p.is_finite() && p.x >= 0.0 && p.y >= 0.0 && p.z >= 0.0) {
            return Err(Error::Data(format!("view {i}: ground truth has non-finite or negative pixels")));
        }
        write_hdr(&out.join(&rel), img.width, img.height, &flatten(&img.radiance))?;
        let entry = FrameEntry { file_path: rel, transform_matrix: cam.to_world };
        if is_test_view(i) {
            test.push(entry)
        } else {
            train.push(entry)
        }
    }
    let counts = (train.len(), test.len());
    for (name, frames) in [("transforms_train.json", train), ("transforms_test.json", test)] {
        let tf = TransformsFile { camera_angle_x: opts.fov_x, frames };
        let p = out.join(name);
        let text = serde_json::to_string_pretty(&tf).map_err(|e| Error::Data(e.to_string()))?;
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    Ok(counts)
}
