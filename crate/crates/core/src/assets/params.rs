use super::envmap::EnvironmentMap;
use super::texture::{Footprint, Texture2D};
use crate::error::{Error, Result};
use crate::math::{Real, Rgb, Vec3};

/// Direction-independent outgoing diffuse radiance stored per surface UV.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffuseCache {
    pub tex: Texture2D,
}

impl DiffuseCache {
    pub fn new(width: usize, height: usize) -> Self {
        Self { tex: Texture2D::constant(width, height, &[0.0, 0.0, 0.0]) }
    }

    pub fn lookup(&self, uv: [f64; 2]) -> (Rgb, Footprint) {
        let (v, fp) = self.tex.lookup(uv);
        (Vec3::new(v[0], v[1], v[2]), fp)
    }
}

/// Optimizable textures of one material.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialParams {
    /// Diffuse albedo; the fourth channel is carried but unused.
    pub kd: Texture2D,
    /// Occlusion, roughness, metalness.
    pub orm: Texture2D,
    /// Tangent-space normal map, identity texel `(0.5, 0.5, 1)`.
    pub normal: Texture2D,
    pub cache: DiffuseCache,
    /// Fixed multiplier on the specular lobe (not optimized).
    pub specular_weight: f64,
}

impl MaterialParams {
    pub fn constant(kd: Rgb, roughness: f64, metalness: f64, res: usize, cache_res: usize) -> Self {
        Self {
            kd: Texture2D::constant(res, res, &[kd.x as f32, kd.y as f32, kd.z as f32, 1.0]),
            orm: Texture2D::constant(res, res, &[1.0, roughness as f32, metalness as f32]),
            normal: Texture2D::constant(res, res, &[0.5, 0.5, 1.0]),
            cache: DiffuseCache::new(cache_res, cache_res),
            specular_weight: 1.0,
        }
    }
}

/// One gradient-carrying texture of the parameter set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamLeaf {
    Kd(usize),
    Orm(usize),
    Normal(usize),
    Cache(usize),
    Env,
}

impl ParamLeaf {
    pub fn kind(&self) -> &'static str {
        match self {
            ParamLeaf::Kd(_) => "kd",
            ParamLeaf::Orm(_) => "orm",
            ParamLeaf::Normal(_) => "normal",
            ParamLeaf::Cache(_) => "cache",
            ParamLeaf::Env => "env",
        }
    }

    /// Valid range enforced by projection.
    pub fn bounds(&self) -> (f32, f32) {
        match self {
            ParamLeaf::Kd(_) | ParamLeaf::Orm(_) | ParamLeaf::Normal(_) => (0.0, 1.0),
            ParamLeaf::Cache(_) | ParamLeaf::Env => (0.0, f32::MAX),
        }
    }
}

/// Every optimizable texel of a scene.
#[derive(Clone, Debug)]
pub struct ParamSet {
    pub materials: Vec<MaterialParams>,
    pub env: EnvironmentMap,
}

impl ParamSet {
    pub fn leaves(&self) -> Vec<ParamLeaf> {
        let mut out = Vec::with_capacity(4 * self.materials.len() + 1);
        for m in 0..self.materials.len() {
            out.extend([ParamLeaf::Kd(m), ParamLeaf::Orm(m), ParamLeaf::Normal(m), ParamLeaf::Cache(m)]);
        }
        out.push(ParamLeaf::Env);
        out
    }

    pub fn texture(&self, leaf: ParamLeaf) -> &Texture2D {
        match leaf {
            ParamLeaf::Kd(m) => &self.materials[m].kd,
            ParamLeaf::Orm(m) => &self.materials[m].orm,
            ParamLeaf::Normal(m) => &self.materials[m].normal,
            ParamLeaf::Cache(m) => &self.materials[m].cache.tex,
            ParamLeaf::Env => &self.env.radiance,
        }
    }

    /// Mutable texel data. Editing the environment marks its CDF stale.
    pub fn data_mut(&mut self, leaf: ParamLeaf) -> &mut [f32] {
        match leaf {
            ParamLeaf::Kd(m) => &mut self.materials[m].kd.data,
            ParamLeaf::Orm(m) => &mut self.materials[m].orm.data,
            ParamLeaf::Normal(m) => &mut self.materials[m].normal.data,
            ParamLeaf::Cache(m) => &mut self.materials[m].cache.tex.data,
            ParamLeaf::Env => {
                self.env.mark_dirty();
                &mut self.env.radiance.data
            }
        }
    }

    /// Clamps every leaf into its valid range, renormalizes normal-map
    /// texels, and rebuilds a stale env CDF.
    pub fn project(&mut self) {
        for leaf in self.leaves() {
            let (lo, hi) = leaf.bounds();
            for v in self.data_mut(leaf) {
                *v = if v.is_nan() { lo } else { v.clamp(lo, hi) };
            }
        }
        for m in &mut self.materials {
            let ch = m.normal.channels;
            if ch >= 3 {
                m.normal.data.chunks_exact_mut(ch).for_each(normalize_normal_texel);
            }
        }
        if self.env.cdf_stale() {
            self.env.build_cdf();
        }
    }

    pub fn all_finite(&self) -> bool {
        self.leaves().into_iter().all(|l| self.texture(l).data.iter().all(|v| v.is_finite()))
    }

    pub fn check_invariants(&self) -> Result<()> {
        for leaf in self.leaves() {
            let (lo, hi) = leaf.bounds();
            if let Some(v) = self.texture(leaf).data.iter().find(|v| !(v.is_finite() && **v >= lo && **v <= hi)) {
                return Err(Error::Data(format!("{} texel {v} outside [{lo}, {hi}]", leaf.kind())));
            }
        }
        Ok(())
    }
}

/// Adjoints for every texel of a [`ParamSet`], same shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct GradBuffer {
    pub materials: Vec<MaterialGrads>,
    pub env: Vec<f64>,
    /// Path contributions accumulated since the last reset.
    pub accumulated: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialGrads {
    pub kd: Vec<f64>,
    pub orm: Vec<f64>,
    pub normal: Vec<f64>,
    pub cache: Vec<f64>,
}

impl GradBuffer {
    pub fn zeros_like(params: &ParamSet) -> Self {
        let materials = params
            .materials
            .iter()
            .map(|m| MaterialGrads {
                kd: vec![0.0; m.kd.data.len()],
                orm: vec![0.0; m.orm.data.len()],
                normal: vec![0.0; m.normal.data.len()],
                cache: vec![0.0; m.cache.tex.data.len()],
            })
            .collect();
        Self { materials, env: vec![0.0; params.env.radiance.data.len()], accumulated: 0 }
    }

    pub fn get(&self, leaf: ParamLeaf) -> &[f64] {
        match leaf {
            ParamLeaf::Kd(m) => &self.materials[m].kd,
            ParamLeaf::Orm(m) => &self.materials[m].orm,
            ParamLeaf::Normal(m) => &self.materials[m].normal,
            ParamLeaf::Cache(m) => &self.materials[m].cache,
            ParamLeaf::Env => &self.env,
        }
    }

    pub fn get_mut(&mut self, leaf: ParamLeaf) -> &mut [f64] {
        match leaf {
            ParamLeaf::Kd(m) => &mut self.materials[m].kd,
            ParamLeaf::Orm(m) => &mut self.materials[m].orm,
            ParamLeaf::Normal(m) => &mut self.materials[m].normal,
            ParamLeaf::Cache(m) => &mut self.materials[m].cache,
            ParamLeaf::Env => &mut self.env,
        }
    }

    pub fn matches(&self, params: &ParamSet) -> bool {
        self.materials.len() == params.materials.len()
            && params.leaves().into_iter().all(|l| self.get(l).len() == params.texture(l).data.len())
    }

    pub fn zero(&mut self) {
        for m in &mut self.materials {
            for v in [&mut m.kd, &mut m.orm, &mut m.normal, &mut m.cache] {
                v.iter_mut().for_each(|x| *x = 0.0);
            }
        }
        self.env.iter_mut().for_each(|x| *x = 0.0);
        self.accumulated = 0;
    }

    /// Adds `other` into `self`; shapes must agree.
    pub fn merge(&mut self, other: &GradBuffer) {
        for (a, b) in self.materials.iter_mut().zip(&other.materials) {
            for (x, y) in [(&mut a.kd, &b.kd), (&mut a.orm, &b.orm), (&mut a.normal, &b.normal), (&mut a.cache, &b.cache)] {
                x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
            }
        }
        self.env.iter_mut().zip(&other.env).for_each(|(p, q)| *p += q);
        self.accumulated += other.accumulated;
    }

    pub fn scale(&mut self, s: f64) {
        for m in &mut self.materials {
            for v in [&mut m.kd, &mut m.orm, &mut m.normal, &mut m.cache] {
                v.iter_mut().for_each(|x| *x *= s);
            }
        }
        self.env.iter_mut().for_each(|x| *x *= s);
    }

    pub fn is_zero(&self) -> bool {
        self.materials.iter().all(|m| {
            m.kd.iter().chain(&m.orm).chain(&m.normal).chain(&m.cache).all(|x| *x == 0.0)
        }) && self.env.iter().all(|x| *x == 0.0)
    }

    pub fn all_finite(&self) -> bool {
        self.materials.iter().all(|m| m.kd.iter().chain(&m.orm).chain(&m.normal).chain(&m.cache).all(|x| x.is_finite()))
            && self.env.iter().all(|x| x.is_finite())
    }
}

/// Rescales a tangent-space texel so it decodes to a unit vector in the
/// upper hemisphere. Decoding normalizes anyway, so without this the texel
/// length is a flat direction the optimizer can drift along.
fn normalize_normal_texel(t: &mut [f32]) {
    let mut v = [2.0 * t[0] as f64 - 1.0, 2.0 * t[1] as f64 - 1.0, (2.0 * t[2] as f64 - 1.0).max(0.0)];
    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if len < 1e-6 {
        v = [0.0, 0.0, 1.0];
    } else {
        v.iter_mut().for_each(|c| *c /= len);
    }
    for c in 0..3 {
        t[c] = ((0.5 * v[c] + 0.5) as f32).clamp(0.0, 1.0);
    }
}

/// Perturbs `frame_n` by a tangent-space normal-map texel in `[0,1]^3`.
pub fn apply_normal_map<S: Real>(tangent: Vec3, bitangent: Vec3, frame_n: Vec3, texel: Vec3<S>) -> Vec3<S> {
    let tx = texel.x * 2.0 - 1.0;
    let ty = texel.y * 2.0 - 1.0;
    let tz = texel.z * 2.0 - 1.0;
    let v = Vec3::<S>::lift(tangent).scale(tx) + Vec3::<S>::lift(bitangent).scale(ty) + Vec3::<S>::lift(frame_n).scale(tz);
    let len2 = v.dot(v).value();
    if !(len2 > 1e-12) || !len2.is_finite() {
        return Vec3::lift(frame_n);
    }
    v.normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{vec3, Frame};
    use crate::sampling::Rng;

    fn params() -> ParamSet {
        ParamSet {
            materials: vec![MaterialParams::constant(Vec3::splat(0.5), 0.5, 0.0, 4, 2)],
            env: EnvironmentMap::constant(8, 4, Vec3::ONE),
        }
    }

    #[test]
    fn identity_normal_texel() {
        let n = vec3(0.2, 0.3, 0.9).normalize();
        let f = Frame::from_normal(n);
        let out = apply_normal_map(f.s, f.t, n, vec3(0.5, 0.5, 1.0));
        assert!((out - n).length() < 1e-12);
        let tilted = apply_normal_map(f.s, f.t, n, vec3(1.0, 0.5, 1.0));
        assert!(tilted.dot(f.s) > 0.5);
    }

    #[test]
    fn normal_map_output_is_unit() {
        let mut rng = Rng::new(3);
        for _ in 0..100_000 {
            let n = crate::sampling::uniform_sphere_from(rng.next_2d());
            let f = Frame::from_normal(n);
            let t = vec3(rng.next_f64(), rng.next_f64(), rng.next_f64());
            let out = apply_normal_map(f.s, f.t, n, t);
            assert!((out.length() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let mut p = params();
        p.data_mut(ParamLeaf::Kd(0))[0] = 1.2;
        p.data_mut(ParamLeaf::Orm(0))[1] = -0.3;
        p.data_mut(ParamLeaf::Env)[4] = -2.0;
        p.data_mut(ParamLeaf::Cache(0))[0] = f32::NAN;
        p.project();
        assert_eq!(p.texture(ParamLeaf::Kd(0)).data[0], 1.0);
        assert_eq!(p.texture(ParamLeaf::Orm(0)).data[1], 0.0);
        assert_eq!(p.texture(ParamLeaf::Env).data[4], 0.0);
        assert!(!p.env.cdf_stale());
        p.check_invariants().unwrap();
        let once: Vec<Vec<f32>> = p.leaves().into_iter().map(|l| p.texture(l).data.clone()).collect();
        p.project();
        let twice: Vec<Vec<f32>> = p.leaves().into_iter().map(|l| p.texture(l).data.clone()).collect();
        assert_eq!(once, twice);
    }

    #[test]
    fn projection_renormalizes_normal_texels() {
        let mut p = params();
        p.data_mut(ParamLeaf::Normal(0))[..3].copy_from_slice(&[0.7, 0.5, 0.6]);
        p.data_mut(ParamLeaf::Normal(0))[3..6].copy_from_slice(&[0.5, 0.5, 0.2]);
        p.project();
        let n = p.texture(ParamLeaf::Normal(0));
        for t in [n.texel(0), n.texel(1)] {
            let v = vec3(2.0 * t[0] as f64 - 1.0, 2.0 * t[1] as f64 - 1.0, 2.0 * t[2] as f64 - 1.0);
            assert!((v.length() - 1.0).abs() < 1e-6 && v.z >= 0.0, "{v:?}");
        }
        assert_eq!(n.texel(1), &[0.5, 0.5, 1.0]);
        // The identity texel is a fixed point.
        assert_eq!(n.texel(2), &[0.5, 0.5, 1.0]);
    }

    #[test]
    fn grad_buffer_mirrors_shapes() {
        let p = params();
        let mut g = GradBuffer::zeros_like(&p);
        assert!(g.matches(&p) && g.is_zero());
        g.get_mut(ParamLeaf::Env)[3] = 2.0;
        let h = g.clone();
        g.merge(&h);
        assert_eq!(g.get(ParamLeaf::Env)[3], 4.0);
        g.zero();
        assert!(g.is_zero());
    }
}
