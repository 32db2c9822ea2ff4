use crate::assets::io;
use crate::error::Result;
use crate::math::{reinhard, srgb_encode, Rgb, Vec3};
use std::path::Path;

/// Counters gathered while rendering.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RenderStats {
    pub camera_samples: u64,
    pub rays: u64,
    /// Samples dropped because they evaluated to NaN or infinity.
    pub nan_samples: u64,
    pub seconds: f64,
}

impl RenderStats {
    pub fn merge(&mut self, o: &RenderStats) {
        self.camera_samples += o.camera_samples;
        self.rays += o.rays;
        self.nan_samples += o.nan_samples;
    }

    pub fn rays_per_second(&self) -> f64 {
        if self.seconds > 0.0 {
            self.rays as f64 / self.seconds
        } else {
            0.0
        }
    }
}

/// Rendered radiance with per-pixel statistics and surface buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct RadianceImage {
    pub width: usize,
    pub height: usize,
    pub radiance: Vec<Rgb>,
    /// Lambertian share of unoccluded first-hit direct light.
    pub diffuse: Vec<Rgb>,
    /// Unbiased per-sample variance of the (clamped) radiance samples.
    pub variance: Vec<Rgb>,
    /// Valid samples averaged into each pixel.
    pub sample_count: Vec<u32>,
    /// Surface seen through the pixel center: uv, material id (`-1` for none), position.
    pub uv: Vec<[f64; 2]>,
    pub material: Vec<i32>,
    pub position: Vec<Vec3>,
    /// Samples whose first hit shared the center's material.
    pub coverage: Vec<u32>,
    pub stats: RenderStats,
}

impl RadianceImage {
    pub fn new(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            radiance: vec![Vec3::ZERO; n],
            diffuse: vec![Vec3::ZERO; n],
            variance: vec![Vec3::ZERO; n],
            sample_count: vec![0; n],
            uv: vec![[0.0; 2]; n],
            material: vec![-1; n],
            position: vec![Vec3::ZERO; n],
            coverage: vec![0; n],
            stats: RenderStats::default(),
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Pixels whose every sample landed on the center surface's material.
    pub fn fully_covered(&self, pixel: usize) -> bool {
        self.material[pixel] >= 0 && self.sample_count[pixel] > 0 && self.coverage[pixel] == self.sample_count[pixel]
    }

    pub fn all_finite(&self) -> bool {
        self.radiance.iter().chain(&self.diffuse).all(|v| v.is_finite())
    }

    pub fn mean(&self) -> Rgb {
        mean_rgb(&self.radiance)
    }

    pub fn write_hdr(&self, path: &Path) -> Result<()> {
        io::write_hdr(path, self.width, self.height, &flatten(&self.radiance))
    }

    pub fn write_diffuse_hdr(&self, path: &Path) -> Result<()> {
        io::write_hdr(path, self.width, self.height, &flatten(&self.diffuse))
    }

    pub fn write_preview(&self, path: &Path) -> Result<()> {
        io::write_preview_png(path, self.width, self.height, &flatten(&self.radiance))
    }
}

pub fn flatten(px: &[Rgb]) -> Vec<f32> {
    px.iter().flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect()
}

pub fn unflatten(data: &[f32]) -> Vec<Rgb> {
    data.chunks_exact(3).map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64)).collect()
}

pub fn mean_rgb(px: &[Rgb]) -> Rgb {
    if px.is_empty() {
        return Vec3::ZERO;
    }
    let mut s = Vec3::ZERO;
    for p in px {
        s += *p;
    }
    s / px.len() as f64
}

/// How linear radiance maps to display values before comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tonemap {
    /// Reinhard `x / (1 + x)` per channel.
    #[default]
    Reinhard,
    Identity,
}

impl Tonemap {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Tonemap::Reinhard => reinhard(x.max(0.0)),
            Tonemap::Identity => x,
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Tonemap::Reinhard => {
                if x < 0.0 {
                    0.0
                } else {
                    crate::math::reinhard_deriv(x)
                }
            }
            Tonemap::Identity => 1.0,
        }
    }
}

/// Value returned by [`psnr`] for identical images.
pub const PSNR_IDENTICAL: f64 = f64::INFINITY;

/// Linear radiance to the 8-bit display range: Reinhard, then sRGB, times 255.
#[inline]
pub fn display_value(x: f64) -> f64 {
    255.0 * srgb_encode(reinhard(x.max(0.0)))
}

/// PSNR in dB between values already in display range `[0, 255]`.
pub fn psnr_display(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "psnr needs equal sizes");
    let mse = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len().max(1) as f64;
    if mse == 0.0 {
        return PSNR_IDENTICAL;
    }
    10.0 * (255.0 * 255.0 / mse).log10()
}

/// PSNR between two linear-radiance images after display mapping.
pub fn psnr(img: &[Rgb], reference: &[Rgb]) -> f64 {
    let map = |px: &[Rgb]| -> Vec<f64> {
        px.iter().flat_map(|p| [display_value(p.x), display_value(p.y), display_value(p.z)]).collect()
    };
    psnr_display(&map(img), &map(reference))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_sentinels() {
        assert_eq!(psnr_display(&[1.0, 2.0], &[1.0, 2.0]), PSNR_IDENTICAL);
        assert!(psnr_display(&[0.0; 4], &[255.0; 4]).abs() < 1e-12);
        let a = vec![100.0; 12];
        let b = vec![101.0; 12];
        assert!((psnr_display(&a, &b) - 20.0 * 255f64.log10()).abs() < 1e-9);
        assert!((psnr_display(&a, &b) - 48.13).abs() < 0.01);
    }

    #[test]
    fn tonemap_derivative_matches_differences() {
        for x in [0.0, 0.3, 2.0, 10.0] {
            let h = 1e-6;
            let fd = (Tonemap::Reinhard.apply(x + h) - Tonemap::Reinhard.apply((x - h).max(0.0))) / (x + h - (x - h).max(0.0));
            assert!((fd - Tonemap::Reinhard.derivative(x)).abs() < 1e-5);
        }
    }
}
