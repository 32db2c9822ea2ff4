//! Browser bindings: render a scene description, and run a small albedo
//! recovery interactively.

use std::path::Path;

use refmc::cli::{dataset_cameras, DatasetOptions};
use refmc::integrator::{display_value, psnr, render, RadianceImage, RenderConfig};
use refmc::math::Rgb;
use refmc::optimizer::{train_step, AdamState, OptimConfig, TrainMask, View};
use refmc::scene_desc::{Scene, SceneDescription};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn load_scene(text: &str) -> Result<Scene, JsError> {
    // No filesystem in the browser: meshes and textures must be inline.
    let desc = SceneDescription::parse_str(text, "scene.toml", None).map_err(js_err)?;
    desc.build(Path::new(".")).map_err(js_err)
}

/// Display-mapped RGBA8 bytes.
fn to_rgba(px: &[Rgb]) -> Vec<u8> {
    px.iter()
        .flat_map(|p| {
            let q = |x: f64| display_value(x).round().clamp(0.0, 255.0) as u8;
            [q(p.x), q(p.y), q(p.z), 255]
        })
        .collect()
}

#[wasm_bindgen]
pub struct Frame {
    width: usize,
    height: usize,
    rgba: Vec<u8>,
    rays: u64,
}

#[wasm_bindgen]
impl Frame {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn rays(&self) -> f64 {
        self.rays as f64
    }
}

fn frame(img: &RadianceImage, px: &[Rgb]) -> Frame {
    Frame { width: img.width, height: img.height, rgba: to_rgba(px), rays: img.stats.rays }
}

/// Renders the first camera of a TOML scene. `channel` is `"radiance"` or
/// `"diffuse"` (the Lambertian direct light the cache learns).
#[wasm_bindgen]
pub fn render_scene(scene_toml: &str, spp: u32, depth: u32, adaptive: bool, channel: &str, seed: u64) -> Result<Frame, JsError> {
    let scene = load_scene(scene_toml)?;
    let cam = scene.cameras.first().ok_or_else(|| JsError::new("scene has no camera"))?;
    let cfg = RenderConfig { spp, depth, adaptive, ..RenderConfig::default() };
    let img = render(&scene.geometry, &scene.params, cam, &cfg, seed).map_err(js_err)?;
    match channel {
        "radiance" => Ok(frame(&img, &img.radiance)),
        "diffuse" => Ok(frame(&img, &img.diffuse)),
        other => Err(JsError::new(&format!("unknown channel `{other}`"))),
    }
}

/// Recovers diffuse albedo textures from views of the scene rendered with
/// its own materials, starting from flat gray.
#[wasm_bindgen]
pub struct Recovery {
    scene: Scene,
    views: Vec<View>,
    ocfg: OptimConfig,
    rcfg: RenderConfig,
    adam: AdamState,
    iter: u32,
}

#[wasm_bindgen]
impl Recovery {
    #[wasm_bindgen(constructor)]
    pub fn new(scene_toml: &str, views: usize, size: usize, seed: u64) -> Result<Recovery, JsError> {
        let mut scene = load_scene(scene_toml)?;
        let opts = DatasetOptions { views: views.max(1), width: size, height: size, seed, ..DatasetOptions::default() };
        let gt_cfg = RenderConfig { spp: 64, depth: 2, ..RenderConfig::default() };
        let views = dataset_cameras(&scene, &opts)
            .map_err(js_err)?
            .into_iter()
            .enumerate()
            .map(|(i, camera)| {
                let img = render(&scene.geometry, &scene.params, &camera, &gt_cfg, seed ^ i as u64)?;
                Ok(View { name: format!("view_{i}"), camera, image: img.radiance })
            })
            .collect::<refmc::Result<Vec<_>>>()
            .map_err(js_err)?;
        for m in &mut scene.params.materials {
            for t in m.kd.data.chunks_mut(m.kd.channels) {
                t[..3].fill(0.5);
            }
        }
        let ocfg = OptimConfig {
            seed,
            warmup: 30,
            train: TrainMask { kd: true, orm: false, normal: false, env: false, cache: true },
            ..OptimConfig::default()
        };
        let rcfg = RenderConfig { spp: 4, depth: 2, ..RenderConfig::default() };
        Ok(Recovery { scene, views, ocfg, rcfg, adam: AdamState::new(), iter: 0 })
    }

    /// Runs `n` Adam steps, one view each; returns the last photometric loss.
    /// The first steps only fit the diffuse cache.
    pub fn step(&mut self, n: u32) -> Result<f64, JsError> {
        let mut loss = f64::NAN;
        for _ in 0..n {
            let view = &self.views[self.iter as usize % self.views.len()];
            let (m, _) = train_step(
                &self.scene.geometry,
                &mut self.scene.params,
                &[view],
                &self.ocfg,
                &self.rcfg,
                &mut self.adam,
                self.iter,
                self.iter < self.ocfg.warmup,
            )
            .map_err(js_err)?;
            loss = m.l_rgb;
            self.iter += 1;
        }
        Ok(loss)
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> u32 {
        self.iter
    }

    #[wasm_bindgen(getter)]
    pub fn view_count(&self) -> usize {
        self.views.len()
    }

    /// Current estimate and ground truth for one view, side by side, plus
    /// their PSNR.
    pub fn compare(&self, view: usize, spp: u32) -> Result<Comparison, JsError> {
        let v = self.views.get(view).ok_or_else(|| JsError::new("no such view"))?;
        let cfg = RenderConfig { spp, ..self.rcfg.clone() };
        let img = render(&self.scene.geometry, &self.scene.params, &v.camera, &cfg, 0x5EED).map_err(js_err)?;
        Ok(Comparison {
            current: frame(&img, &img.radiance),
            target: frame(&img, &v.image),
            psnr: psnr(&img.radiance, &v.image),
        })
    }
}

#[wasm_bindgen]
pub struct Comparison {
    current: Frame,
    target: Frame,
    psnr: f64,
}

#[wasm_bindgen]
impl Comparison {
    pub fn current(&self) -> Frame {
        Frame { rgba: self.current.rgba.clone(), ..self.current }
    }

    pub fn target(&self) -> Frame {
        Frame { rgba: self.target.rgba.clone(), ..self.target }
    }

    #[wasm_bindgen(getter)]
    pub fn psnr(&self) -> f64 {
        self.psnr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENE: &str = r#"
[environment]
radiance = [1.0, 1.0, 1.0]

[[material]]
name = "clay"
base_color = [0.8, 0.4, 0.2]
texture_resolution = 4

[[mesh]]
material = "clay"
quad = { origin = [-1.0, 0.0, 1.0], u = [2.0, 0.0, 0.0], v = [0.0, 0.0, -2.0] }

[[camera]]
eye = [0.0, 2.0, 2.0]
target = [0.0, 0.0, 0.0]
fov_x = 40.0
width = 8
height = 6
"#;

    #[test]
    fn render_scene_returns_rgba() {
        let f = render_scene(SCENE, 2, 2, true, "radiance", 1).ok().unwrap();
        assert_eq!((f.width(), f.height()), (8, 6));
        assert_eq!(f.rgba().len(), 8 * 6 * 4);
        assert!(f.rays() > 0.0);
        assert!(render_scene(SCENE, 2, 2, true, "diffuse", 1).is_ok());
    }

    #[test]
    fn recovery_improves_on_gray() {
        let mut r = Recovery::new(SCENE, 2, 12, 3).ok().unwrap();
        let before = r.compare(0, 16).ok().unwrap().psnr();
        r.step(150).ok().unwrap();
        let after = r.compare(0, 16).ok().unwrap().psnr();
        assert_eq!(r.iterations(), 150);
        assert!(after > before + 3.0, "{before} -> {after}");
    }
}
