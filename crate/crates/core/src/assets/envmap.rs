use super::texture::{Footprint, Texture2D, Wrap};
use crate::error::Result;
use crate::math::{vec3, Rgb, Vec3, PI};
use crate::sampling::{uniform_sphere_from, DirectionSample, Distribution2D, Strategy, UNIFORM_SPHERE_PDF};

/// Fraction of the mean luminance added to every texel's sampling weight, so
/// that directions whose bilinear radiance borrows from a bright neighbour
/// still have nonzero light-sampling density.
pub const PDF_FLOOR: f64 = 1e-3;

/// Equirectangular radiance map, `+z` up.
///
/// Column `i` covers azimuth `phi = atan2(y, x)` in `[2 pi i / W, 2 pi (i+1) / W)`;
/// row `j` covers polar angle `theta = acos(z)` in `[pi j / H, pi (j+1) / H)`.
#[derive(Clone, Debug)]
pub struct EnvironmentMap {
    pub radiance: Texture2D,
    distribution: Distribution2D,
    uniform_fallback: bool,
    cdf_stale: bool,
}

impl EnvironmentMap {
    pub fn new(mut radiance: Texture2D) -> Result<Self> {
        if radiance.channels != 3 {
            return Err(crate::Error::Data(format!(
                "environment map needs 3 channels, got {}",
                radiance.channels
            )));
        }
        radiance.wrap_u = Wrap::Repeat;
        radiance.wrap_v = Wrap::Clamp;
        let mut env = Self { radiance, distribution: Distribution2D::default(), uniform_fallback: true, cdf_stale: true };
        env.build_cdf();
        Ok(env)
    }

    pub fn constant(width: usize, height: usize, value: Rgb) -> Self {
        let tex = Texture2D::constant(width, height, &[value.x as f32, value.y as f32, value.z as f32]);
        Self::new(tex).expect("constant map is well formed")
    }

    pub fn width(&self) -> usize {
        self.radiance.width
    }

    pub fn height(&self) -> usize {
        self.radiance.height
    }

    pub fn uses_uniform_fallback(&self) -> bool {
        self.uniform_fallback
    }

    /// True after radiance edits until [`EnvironmentMap::build_cdf`] runs.
    pub fn cdf_stale(&self) -> bool {
        self.cdf_stale
    }

    pub fn mark_dirty(&mut self) {
        self.cdf_stale = true;
    }

    pub fn distribution(&self) -> &Distribution2D {
        &self.distribution
    }

    /// Rebuilds the marginal/conditional tables over `luminance * sin(theta)`.
    pub fn build_cdf(&mut self) {
        let (w, h) = (self.width(), self.height());
        let lum: Vec<f64> = (0..w * h)
            .map(|i| {
                let t = self.radiance.texel(i);
                vec3(t[0] as f64, t[1] as f64, t[2] as f64).luminance().max(0.0)
            })
            .collect();
        let mean = lum.iter().sum::<f64>() / lum.len() as f64;
        self.uniform_fallback = !(mean > 0.0 && mean.is_finite());
        let floor = PDF_FLOOR * mean;
        let mut func = vec![0.0; w * h];
        for j in 0..h {
            let sin_theta = (PI * (j as f64 + 0.5) / h as f64).sin();
            for i in 0..w {
                func[j * w + i] = (lum[j * w + i] + floor) * sin_theta;
            }
        }
        self.distribution = Distribution2D::new(&func, w, h);
        self.cdf_stale = false;
    }

    /// Equirectangular coordinates in `[0,1)^2` of a unit direction.
    #[inline]
    pub fn direction_to_uv(d: Vec3) -> [f64; 2] {
        let phi = d.y.atan2(d.x).rem_euclid(2.0 * PI);
        let theta = d.z.clamp(-1.0, 1.0).acos();
        [phi / (2.0 * PI), theta / PI]
    }

    #[inline]
    pub fn uv_to_direction(uv: [f64; 2]) -> Vec3 {
        let phi = uv[0] * 2.0 * PI;
        let theta = uv[1] * PI;
        let s = theta.sin();
        vec3(s * phi.cos(), s * phi.sin(), theta.cos())
    }

    /// Bilinear radiance toward `dir` and the texels it blends.
    pub fn lookup(&self, dir: Vec3) -> (Rgb, Footprint) {
        let (v, fp) = self.radiance.lookup(Self::direction_to_uv(dir));
        (vec3(v[0], v[1], v[2]), fp)
    }

    pub fn sample_direction(&self, u: [f64; 2]) -> DirectionSample {
        debug_assert!(!self.cdf_stale, "environment CDF used before rebuild");
        if self.uniform_fallback {
            return DirectionSample {
                direction: uniform_sphere_from(u),
                pdf: UNIFORM_SPHERE_PDF,
                strategy: Strategy::EnvLight,
            };
        }
        let (uv, _, pdf_uv) = self.distribution.sample(u);
        let theta = uv[1] * PI;
        let sin_theta = theta.sin();
        if pdf_uv <= 0.0 || sin_theta <= 0.0 {
            return DirectionSample { direction: Vec3::Z, pdf: 0.0, strategy: Strategy::EnvLight };
        }
        DirectionSample {
            direction: Self::uv_to_direction(uv),
            pdf: pdf_uv / (2.0 * PI * PI * sin_theta),
            strategy: Strategy::EnvLight,
        }
    }

    /// Solid-angle density of [`EnvironmentMap::sample_direction`].
    pub fn pdf(&self, dir: Vec3) -> f64 {
        if self.uniform_fallback {
            return UNIFORM_SPHERE_PDF;
        }
        let uv = Self::direction_to_uv(dir);
        let sin_theta = (uv[1] * PI).sin();
        if sin_theta <= 0.0 {
            return 0.0;
        }
        let col = ((uv[0] * self.width() as f64) as usize).min(self.width() - 1);
        let row = ((uv[1] * self.height() as f64) as usize).min(self.height() - 1);
        self.distribution.pdf_texel(col, row) / (2.0 * PI * PI * sin_theta)
    }

    /// Solid angle subtended by the texels of row `row`, each.
    pub fn texel_solid_angle(&self, row: usize) -> f64 {
        let h = self.height() as f64;
        let t0 = PI * row as f64 / h;
        let t1 = PI * (row + 1) as f64 / h;
        2.0 * PI / self.width() as f64 * (t0.cos() - t1.cos())
    }

    pub fn project(&mut self) {
        self.radiance.clamp_values(0.0, f32::MAX);
        self.mark_dirty();
    }
}
