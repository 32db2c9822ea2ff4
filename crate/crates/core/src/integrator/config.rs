use serde::{Deserialize, Serialize};

use crate::brdf::DiffuseModel;
use crate::error::{Error, Result};

/// Sampling budget and bounce policy of a render.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    /// Camera samples per pixel.
    pub spp: u32,
    /// Environment and BSDF samples per camera sample at the first hit.
    pub n_light: u32,
    pub n_brdf: u32,
    /// Number of surface interactions sampled along a path: 1, 2 or 3.
    pub depth: u32,
    /// MIS budget at secondary hits when full shading is used there.
    pub n_light_secondary: u32,
    pub n_brdf_secondary: u32,
    /// Specular-lobe rays per secondary hit in adaptive mode.
    pub n_spec_secondary: u32,
    /// Per-sample radiance ceiling as a multiple of the solid-angle mean
    /// environment luminance. `inf` disables clamping.
    pub firefly: f64,
    /// Read diffuse light from the cache at the last bounce and only trace
    /// the specular lobe there.
    pub adaptive: bool,
    /// In adaptive mode, use the cache at every secondary bounce instead of
    /// only the last one.
    pub cache_every_bounce: bool,
    /// Diffuse lobe at the first hit; secondary hits are always Lambertian.
    pub primary_model: DiffuseModel,
    /// Tile edge length in pixels.
    pub tile: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            spp: 16,
            n_light: 4,
            n_brdf: 4,
            depth: 2,
            n_light_secondary: 4,
            n_brdf_secondary: 4,
            n_spec_secondary: 4,
            firefly: 50.0,
            adaptive: true,
            cache_every_bounce: false,
            primary_model: DiffuseModel::Disney,
            tile: 16,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Data(format!("render config: {m}")));
        if self.spp == 0 {
            return bad("spp must be at least 1");
        }
        if !(1..=3).contains(&self.depth) {
            return bad("depth must be 1, 2 or 3");
        }
        if self.n_light + self.n_brdf == 0 {
            return bad("n_light + n_brdf must be positive");
        }
        if self.depth > 1 && !self.adaptive && self.n_light_secondary + self.n_brdf_secondary == 0 {
            return bad("secondary MIS budget must be positive");
        }
        if !(self.firefly > 0.0) {
            return bad("firefly clamp must be positive");
        }
        if self.tile == 0 {
            return bad("tile size must be positive");
        }
        Ok(())
    }
}
