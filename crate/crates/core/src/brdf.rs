//! GGX microfacet specular plus two diffuse models.
//!
//! Roughness is the perceptual parameter `r`; the distribution uses
//! `alpha = r^2` and `r` is floored at [`ROUGHNESS_MIN`]. Base reflectance is
//! `F0 = lerp(0.04, k_d, metalness)` and the diffuse term is scaled by
//! `1 - metalness`.

use crate::math::{Real, Vec3, INV_PI};

/// Lower bound applied to perceptual roughness before shading.
pub const ROUGHNESS_MIN: f64 = 0.04;

/// Dielectric base reflectance.
pub const F0_DIELECTRIC: f64 = 0.04;

/// Diffuse lobe used when evaluating a BSDF.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffuseModel {
    /// Disney diffuse with the `F_D90` retro-reflection term.
    #[default]
    Disney,
    /// Direction-independent `c_diff / pi`.
    Lambert,
}

/// Material at a shading point.
///
/// Generic so that the adjoint pass can push dual numbers through the
/// optimizable channels; `occlusion` is carried along but never shaded.
#[derive(Clone, Copy, Debug)]
pub struct SurfaceMaterial<S = f64> {
    pub base_color: Vec3<S>,
    pub roughness: S,
    pub metalness: S,
    pub occlusion: f64,
    /// Unit shading normal.
    pub normal: Vec3<S>,
    /// Multiplier on the specular lobe; 0 gives a purely diffuse surface.
    pub specular_weight: f64,
}

impl SurfaceMaterial<f64> {
    pub fn diffuse(albedo: Vec3, normal: Vec3) -> Self {
        Self {
            base_color: albedo,
            roughness: 1.0,
            metalness: 0.0,
            occlusion: 1.0,
            normal,
            specular_weight: 0.0,
        }
    }

    pub fn new(base_color: Vec3, roughness: f64, metalness: f64, normal: Vec3) -> Self {
        Self {
            base_color,
            roughness,
            metalness,
            occlusion: 1.0,
            normal,
            specular_weight: 1.0,
        }
    }
}

impl<S: Real> SurfaceMaterial<S> {
    /// Roughness after the `[ROUGHNESS_MIN, 1]` clamp.
    #[inline]
    pub fn shading_roughness(&self) -> S {
        self.roughness.clamp(ROUGHNESS_MIN, 1.0)
    }

    #[inline]
    pub fn alpha(&self) -> S {
        let r = self.shading_roughness();
        r * r
    }

    /// `F0 = lerp(0.04, k_d, m)`.
    #[inline]
    pub fn f0(&self) -> Vec3<S> {
        let m = self.metalness;
        let one_minus = S::cst(1.0) - m;
        Vec3::new(
            one_minus * F0_DIELECTRIC + self.base_color.x * m,
            one_minus * F0_DIELECTRIC + self.base_color.y * m,
            one_minus * F0_DIELECTRIC + self.base_color.z * m,
        )
    }

    /// Diffuse albedo `c_diff = k_d (1 - m)`.
    #[inline]
    pub fn diffuse_albedo(&self) -> Vec3<S> {
        self.base_color.scale(S::cst(1.0) - self.metalness)
    }
}

/// GGX normal distribution for `cos_h = n·h` and `alpha = r^2`.
#[inline]
pub fn d_ggx<S: Real>(cos_h: S, alpha: S) -> S {
    let a2 = alpha * alpha;
    let t = cos_h * cos_h * (a2 - 1.0) + 1.0;
    a2 * INV_PI / (t * t)
}

/// Smith `Lambda` for a direction at cosine `cos` from the normal.
#[inline]
pub fn smith_lambda<S: Real>(cos: S, alpha: S) -> S {
    let c2 = cos * cos;
    let tan2 = (S::cst(1.0) - c2).max(S::cst(0.0)) / c2;
    ((alpha * alpha * tan2 + 1.0).sqrt() - 1.0) * 0.5
}

/// Uncorrelated single-direction masking `G1`.
#[inline]
pub fn smith_g1<S: Real>(cos: S, alpha: S) -> S {
    S::cst(1.0) / (smith_lambda(cos, alpha) + 1.0)
}

/// Height-correlated masking-shadowing `G2`.
#[inline]
pub fn smith_g2<S: Real>(cos_i: S, cos_o: S, alpha: S) -> S {
    S::cst(1.0) / (smith_lambda(cos_i, alpha) + smith_lambda(cos_o, alpha) + 1.0)
}

/// Schlick Fresnel, `F0 + (1 - F0)(1 - cos)^5`.
#[inline]
pub fn fresnel_schlick<S: Real>(f0: Vec3<S>, cos: S) -> Vec3<S> {
    let w = (S::cst(1.0) - cos.clamp(0.0, 1.0)).pow5();
    Vec3::new(
        f0.x + (S::cst(1.0) - f0.x) * w,
        f0.y + (S::cst(1.0) - f0.y) * w,
        f0.z + (S::cst(1.0) - f0.z) * w,
    )
}

/// Microfacet distribution at half-vector `h` for roughness `r`.
pub fn ggx_d(n: Vec3, h: Vec3, roughness: f64) -> f64 {
    let r = roughness.clamp(ROUGHNESS_MIN, 1.0);
    d_ggx(n.dot(h).max(0.0), r * r)
}

/// Height-correlated Smith term for a pair of directions.
pub fn smith_g(n: Vec3, wi: Vec3, wo: Vec3, roughness: f64) -> f64 {
    let r = roughness.clamp(ROUGHNESS_MIN, 1.0);
    let (ci, co) = (n.dot(wi), n.dot(wo));
    if ci <= 0.0 || co <= 0.0 {
        return 0.0;
    }
    smith_g2(ci, co, r * r)
}

/// Diffuse and specular parts of a BSDF evaluation, in sr^-1.
#[derive(Clone, Copy, Debug)]
pub struct BsdfValue<S = f64> {
    pub diffuse: Vec3<S>,
    pub specular: Vec3<S>,
}

impl<S: Real> BsdfValue<S> {
    fn black() -> Self {
        Self { diffuse: Vec3::splat_s(S::cst(0.0)), specular: Vec3::splat_s(S::cst(0.0)) }
    }

    #[inline]
    pub fn total(&self) -> Vec3<S> {
        self.diffuse + self.specular
    }
}

/// Evaluates `f = f_d + D F G / (4 (n·wi)(n·wo))` with the chosen diffuse model.
///
/// `wi` and `wo` point away from the surface. Returns black when either
/// direction lies below the shading hemisphere.
pub fn eval_bsdf<S: Real>(mat: &SurfaceMaterial<S>, wi: Vec3, wo: Vec3, model: DiffuseModel) -> BsdfValue<S> {
    let n = mat.normal;
    let wi_s = Vec3::<S>::lift(wi);
    let wo_s = Vec3::<S>::lift(wo);
    let cos_i = n.dot(wi_s);
    let cos_o = n.dot(wo_s);
    if cos_i.value() <= 0.0 || cos_o.value() <= 0.0 {
        return BsdfValue::black();
    }

    let h = (wi + wo).normalize();
    // wi·h is independent of the normal.
    let cos_d = wi.dot(h).clamp(0.0, 1.0);
    let c_diff = mat.diffuse_albedo();
    let diffuse = match model {
        DiffuseModel::Lambert => c_diff * INV_PI,
        DiffuseModel::Disney => {
            let r = mat.shading_roughness();
            let fd90 = r * (2.0 * cos_d * cos_d) + 0.5;
            let k = fd90 - 1.0;
            let li = k * (S::cst(1.0) - cos_i).pow5() + 1.0;
            let lo = k * (S::cst(1.0) - cos_o).pow5() + 1.0;
            c_diff.scale(li * lo * INV_PI)
        }
    };

    let specular = if mat.specular_weight > 0.0 {
        let alpha = mat.alpha();
        let cos_h = n.dot(Vec3::lift(h)).max(S::cst(0.0));
        let d = d_ggx(cos_h, alpha);
        let g = smith_g2(cos_i, cos_o, alpha);
        let f = fresnel_schlick(mat.f0(), S::cst(cos_d));
        let k = d * g / (cos_i * cos_o * 4.0) * mat.specular_weight;
        f.scale(k)
    } else {
        Vec3::splat_s(S::cst(0.0))
    };

    BsdfValue { diffuse, specular }
}

/// BSDF used at the first visible surface: Disney diffuse plus GGX.
pub fn eval_bsdf_primary(mat: &SurfaceMaterial, wi: Vec3, wo: Vec3) -> Vec3 {
    eval_bsdf(mat, wi, wo, DiffuseModel::Disney).total()
}

/// BSDF used at secondary surfaces: Lambertian diffuse plus GGX.
pub fn eval_bsdf_indirect(mat: &SurfaceMaterial, wi: Vec3, wo: Vec3) -> Vec3 {
    eval_bsdf(mat, wi, wo, DiffuseModel::Lambert).total()
}
