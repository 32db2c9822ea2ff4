//! Random numbers, direction samplers, their densities, and MIS weights.

use crate::brdf::{d_ggx, smith_g1, ROUGHNESS_MIN};
use crate::math::{vec3, Frame, Vec3, INV_PI, PI};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based generator: the `k`-th output is a pure hash of `(seed, k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rng {
    seed: u64,
    counter: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed: mix64(seed ^ 0x5851_F42D_4C95_7F2D), counter: 0 }
    }

    /// Independent stream keyed by `seed` and a list of indices
    /// (pixel, sample, bounce, ...).
    pub fn derive(seed: u64, keys: &[u64]) -> Self {
        let mut h = mix64(seed ^ 0x5851_F42D_4C95_7F2D);
        for &k in keys {
            h = mix64(h ^ mix64(k.wrapping_add(GOLDEN_GAMMA)));
        }
        Self { seed: h, counter: 0 }
    }

    /// Child stream decorrelated from this one; does not advance `self`.
    pub fn fork(&self, tag: u64) -> Self {
        Self::derive(self.seed, &[self.counter, tag])
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = mix64(self.seed.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)));
        self.counter = self.counter.wrapping_add(1);
        v
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn next_2d(&mut self) -> [f64; 2] {
        [self.next_f64(), self.next_f64()]
    }
}

/// Which strategy produced a direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    EnvLight,
    BrdfDiffuse,
    BrdfSpecular,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionSample {
    pub direction: Vec3,
    /// Solid-angle density, sr^-1. Zero marks a rejected sample.
    pub pdf: f64,
    pub strategy: Strategy,
}

impl DirectionSample {
    pub fn is_valid(&self) -> bool {
        self.pdf > 0.0
    }
}

/// Shirley-Chiu concentric square-to-disk mapping.
fn concentric_disk(u: [f64; 2]) -> (f64, f64) {
    let a = 2.0 * u[0] - 1.0;
    let b = 2.0 * u[1] - 1.0;
    if a == 0.0 && b == 0.0 {
        return (0.0, 0.0);
    }
    let (r, theta) = if a.abs() > b.abs() {
        (a, PI / 4.0 * (b / a))
    } else {
        (b, PI / 2.0 - PI / 4.0 * (a / b))
    };
    (r * theta.cos(), r * theta.sin())
}

/// Cosine-weighted direction around `n` from two uniforms.
pub fn cosine_hemisphere_from(n: Vec3, u: [f64; 2]) -> DirectionSample {
    let (x, y) = concentric_disk(u);
    let z = (1.0 - x * x - y * y).max(0.0).sqrt();
    let direction = Frame::from_normal(n).to_world(vec3(x, y, z)).normalize();
    let cos = direction.dot(n).max(0.0);
    // Boundary samples (z == 0) get a tiny positive density instead of zero.
    let pdf = (cos * INV_PI).max(f64::MIN_POSITIVE);
    DirectionSample { direction, pdf, strategy: Strategy::BrdfDiffuse }
}

pub fn sample_cosine_hemisphere(n: Vec3, rng: &mut Rng) -> DirectionSample {
    cosine_hemisphere_from(n, rng.next_2d())
}

pub fn cosine_hemisphere_pdf(n: Vec3, wi: Vec3) -> f64 {
    n.dot(wi).max(0.0) * INV_PI
}

/// Uniform direction on the unit sphere.
pub fn uniform_sphere_from(u: [f64; 2]) -> Vec3 {
    let z = 1.0 - 2.0 * u[0];
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * PI * u[1];
    vec3(r * phi.cos(), r * phi.sin(), z)
}

pub const UNIFORM_SPHERE_PDF: f64 = 0.25 * INV_PI;

/// Visible-normal sampling of the GGX distribution (Heitz 2018) in the local
/// frame where the normal is +z.
fn sample_vndf_local(wo: Vec3, alpha: f64, u: [f64; 2]) -> Vec3 {
    let vh = vec3(alpha * wo.x, alpha * wo.y, wo.z).normalize();
    let lensq = vh.x * vh.x + vh.y * vh.y;
    let t1 = if lensq > 0.0 { vec3(-vh.y, vh.x, 0.0) * (1.0 / lensq.sqrt()) } else { Vec3::X };
    let t2 = vh.cross(t1);
    let r = u[0].sqrt();
    let phi = 2.0 * PI * u[1];
    let p1 = r * phi.cos();
    let mut p2 = r * phi.sin();
    let s = 0.5 * (1.0 + vh.z);
    p2 = (1.0 - s) * (1.0 - p1 * p1).max(0.0).sqrt() + s * p2;
    let nh = t1 * p1 + t2 * p2 + vh * (1.0 - p1 * p1 - p2 * p2).max(0.0).sqrt();
    vec3(alpha * nh.x, alpha * nh.y, nh.z.max(1e-12)).normalize()
}

/// GGX lobe sample from explicit uniforms; see [`sample_ggx`].
pub fn ggx_from(n: Vec3, wo: Vec3, roughness: f64, u: [f64; 2]) -> DirectionSample {
    let r = roughness.clamp(ROUGHNESS_MIN, 1.0);
    let alpha = r * r;
    let frame = Frame::from_normal(n);
    let wo_l = frame.to_local(wo);
    let reject = DirectionSample { direction: n, pdf: 0.0, strategy: Strategy::BrdfSpecular };
    if wo_l.z <= 0.0 {
        return reject;
    }
    let h_l = sample_vndf_local(wo_l, alpha, u);
    let wi_l = wo_l.reflect(h_l);
    if wi_l.z <= 0.0 {
        return reject;
    }
    let direction = frame.to_world(wi_l).normalize();
    let pdf = ggx_pdf(n, wo, direction, r);
    if pdf <= 0.0 {
        return reject;
    }
    DirectionSample { direction, pdf, strategy: Strategy::BrdfSpecular }
}

/// Reflects `wo` about a visible GGX microfacet normal.
///
/// Returns a zero-pdf sample when the reflection ends up below the surface;
/// callers drop those.
pub fn sample_ggx(n: Vec3, wo: Vec3, roughness: f64, rng: &mut Rng) -> DirectionSample {
    ggx_from(n, wo, roughness, rng.next_2d())
}

/// Density of [`sample_ggx`] over solid angle: `G1(wo) D(h) / (4 n·wo)`.
pub fn ggx_pdf(n: Vec3, wo: Vec3, wi: Vec3, roughness: f64) -> f64 {
    let cos_o = n.dot(wo);
    let cos_i = n.dot(wi);
    if cos_o <= 0.0 || cos_i <= 0.0 {
        return 0.0;
    }
    let r = roughness.clamp(ROUGHNESS_MIN, 1.0);
    let alpha = r * r;
    let h = (wi + wo).normalize();
    let cos_h = n.dot(h);
    if cos_h <= 0.0 {
        return 0.0;
    }
    smith_g1(cos_o, alpha) * d_ggx(cos_h, alpha) / (4.0 * cos_o)
}

/// Piecewise-constant 1D distribution over `[0, 1)`.
#[derive(Clone, Debug, Default)]
pub struct Distribution1D {
    func: Vec<f64>,
    cdf: Vec<f64>,
    integral: f64,
}

impl Distribution1D {
    pub fn new(func: Vec<f64>) -> Self {
        let n = func.len();
        let mut cdf = Vec::with_capacity(n + 1);
        cdf.push(0.0);
        for i in 0..n {
            cdf.push(cdf[i] + func[i].max(0.0) / n as f64);
        }
        let integral = cdf[n];
        if integral > 0.0 {
            for c in cdf.iter_mut().skip(1) {
                *c /= integral;
            }
        } else {
            for (i, c) in cdf.iter_mut().enumerate().skip(1) {
                *c = i as f64 / n as f64;
            }
        }
        cdf[n] = 1.0;
        Self { func, cdf, integral }
    }

    pub fn len(&self) -> usize {
        self.func.len()
    }

    pub fn is_empty(&self) -> bool {
        self.func.is_empty()
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Probability mass of bin `i`.
    pub fn mass(&self, i: usize) -> f64 {
        self.cdf[i + 1] - self.cdf[i]
    }

    /// Continuous sample in `[0, 1)`, its bin, and the density over `[0, 1)`.
    pub fn sample(&self, u: f64) -> (f64, usize, f64) {
        let n = self.func.len();
        // Last index with cdf <= u.
        let idx = self.cdf.partition_point(|&c| c <= u).saturating_sub(1).min(n - 1);
        let mass = self.mass(idx);
        let du = if mass > 0.0 { (u - self.cdf[idx]) / mass } else { 0.5 };
        let x = ((idx as f64 + du.clamp(0.0, 1.0)) / n as f64).min(1.0 - f64::EPSILON);
        (x, idx, mass * n as f64)
    }
}

/// Marginal-conditional 2D distribution over `[0,1)^2`; rows index `v`.
#[derive(Clone, Debug, Default)]
pub struct Distribution2D {
    conditional: Vec<Distribution1D>,
    marginal: Distribution1D,
}

impl Distribution2D {
    /// `func` is row-major with `width` columns and `height` rows.
    pub fn new(func: &[f64], width: usize, height: usize) -> Self {
        let conditional: Vec<_> =
            (0..height).map(|j| Distribution1D::new(func[j * width..(j + 1) * width].to_vec())).collect();
        let marginal = Distribution1D::new(conditional.iter().map(|c| c.integral()).collect());
        Self { conditional, marginal }
    }

    pub fn integral(&self) -> f64 {
        self.marginal.integral()
    }

    pub fn marginal(&self) -> &Distribution1D {
        &self.marginal
    }

    pub fn conditional(&self, row: usize) -> &Distribution1D {
        &self.conditional[row]
    }

    /// Returns `(u, v)`, the texel `(col, row)`, and the density over `[0,1)^2`.
    pub fn sample(&self, u: [f64; 2]) -> ([f64; 2], (usize, usize), f64) {
        let (v, row, pdf_v) = self.marginal.sample(u[1]);
        let (x, col, pdf_u) = self.conditional[row].sample(u[0]);
        ([x, v], (col, row), pdf_u * pdf_v)
    }

    /// Density over `[0,1)^2` at texel `(col, row)`.
    pub fn pdf_texel(&self, col: usize, row: usize) -> f64 {
        let w = self.conditional[row].len() as f64;
        let h = self.marginal.len() as f64;
        self.marginal.mass(row) * self.conditional[row].mass(col) * w * h
    }
}

/// Light-strategy sample from the environment's luminance distribution.
pub fn sample_envmap(env: &crate::assets::EnvironmentMap, rng: &mut Rng) -> DirectionSample {
    env.sample_direction(rng.next_2d())
}

/// Balance heuristic `n_s p_s / (n_s p_s + n_o p_o)`.
#[inline]
pub fn mis_balance_weight(pdf_self: f64, n_self: usize, pdf_other: f64, n_other: usize) -> f64 {
    let a = n_self as f64 * pdf_self;
    let b = n_other as f64 * pdf_other;
    if a + b <= 0.0 {
        return 0.0;
    }
    a / (a + b)
}
