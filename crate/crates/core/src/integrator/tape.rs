//! Recorded path structure of a render and the adjoint pass over it.
//!
//! Every camera sample is a small tree. Nodes are shading points; each edge
//! is one direction sample at its node and carries everything the estimator
//! needs except the parameter values: the direction, the detached factor
//! `k = 1 / (n_l p_l + n_b p_b)` and what it connects to (environment,
//! diffuse cache, or a child node). Replaying the edges against a parameter
//! set reproduces the render bit-exactly; differentiating the replay gives
//! gradients with sampling held fixed.

use crate::assets::{apply_normal_map, Footprint, GradBuffer, ParamSet, Texture2D};
use crate::brdf::{eval_bsdf, DiffuseModel, SurfaceMaterial};
use crate::error::{Error, Result};
use crate::math::{Dual, Real, Rgb, Vec3};

/// Local material variables differentiated per node:
/// base color rgb, roughness, metalness, normal-map texel xyz.
pub const LOCAL_VARS: usize = 8;
type D = Dual<LOCAL_VARS>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lobe {
    /// Full BSDF with the given diffuse model.
    Total(DiffuseModel),
    /// Lambertian diffuse part only.
    Diffuse,
    /// GGX part only.
    Specular,
    /// Constant factor one (cache reads).
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    Env,
    Cache,
    Child(u32),
}

#[derive(Clone, Copy, Debug)]
pub struct Edge {
    pub wi: Vec3,
    pub k: f64,
    pub lobe: Lobe,
    pub target: Target,
    /// Contributes to the diffuse-light buffer instead of radiance.
    pub diffuse_channel: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct Node {
    pub material: u32,
    pub uv: [f64; 2],
    pub wo: Vec3,
    /// Interpolated normal (facing `wo`) and tangent frame for normal mapping.
    pub n: Vec3,
    pub s: Vec3,
    pub t: Vec3,
    pub edges: (u32, u32),
}

#[derive(Clone, Copy, Debug)]
pub enum Root {
    Miss(Vec3),
    Node(u32),
}

#[derive(Clone, Copy, Debug)]
pub struct SampleRecord {
    pub root: Root,
    /// Detached firefly-clamp factors.
    pub scale: f64,
    pub diffuse_scale: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct PixelRecord {
    pub pixel: u32,
    pub first_sample: u32,
    pub samples: u32,
}

/// Tape of one tile.
#[derive(Clone, Debug, Default)]
pub struct TapeChunk {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub samples: Vec<SampleRecord>,
    pub pixels: Vec<PixelRecord>,
}

impl TapeChunk {
    pub(crate) fn checkpoint(&self) -> (usize, usize) {
        (self.nodes.len(), self.edges.len())
    }

    pub(crate) fn rollback(&mut self, cp: (usize, usize)) {
        self.nodes.truncate(cp.0);
        self.edges.truncate(cp.1);
    }
}

/// Texture shapes a tape was recorded against.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Signature(Vec<(usize, usize, usize)>);

impl Signature {
    fn of(params: &ParamSet) -> Self {
        Signature(
            params
                .leaves()
                .into_iter()
                .map(|l| {
                    let t = params.texture(l);
                    (t.width, t.height, t.channels)
                })
                .collect(),
        )
    }
}

/// Path records of a whole image.
#[derive(Clone, Debug)]
pub struct Tape {
    pub width: usize,
    pub height: usize,
    pub chunks: Vec<TapeChunk>,
    signature: Signature,
}

/// Material at a node, with each optimizable channel passed through `var`.
#[inline]
pub(crate) fn material_at<S: Real>(params: &ParamSet, node: &Node, var: impl Fn(f64, usize) -> S) -> SurfaceMaterial<S> {
    let mp = &params.materials[node.material as usize];
    let (kd, _) = mp.kd.lookup(node.uv);
    let (orm, _) = mp.orm.lookup(node.uv);
    let (nt, _) = mp.normal.lookup(node.uv);
    let texel = Vec3::new(var(nt[0], 5), var(nt[1], 6), var(nt[2], 7));
    SurfaceMaterial {
        base_color: Vec3::new(var(kd[0], 0), var(kd[1], 1), var(kd[2], 2)),
        roughness: var(orm[1], 3),
        metalness: var(orm[2], 4),
        occlusion: orm[0],
        normal: apply_normal_map(node.s, node.t, node.n, texel),
        specular_weight: mp.specular_weight,
    }
}

#[inline]
pub(crate) fn material_f64(params: &ParamSet, node: &Node) -> SurfaceMaterial {
    material_at(params, node, |v, _| v)
}

/// Path throughput factor of one edge: `f(wi, wo) cos k`.
#[inline]
pub(crate) fn edge_beta<S: Real>(mat: &SurfaceMaterial<S>, wo: Vec3, e: &Edge) -> Vec3<S> {
    let (model, part) = match e.lobe {
        Lobe::Unit => return Vec3::splat_s(S::cst(1.0)),
        Lobe::Total(m) => (m, 0),
        Lobe::Diffuse => (DiffuseModel::Lambert, 1),
        Lobe::Specular => (DiffuseModel::Lambert, 2),
    };
    let f = eval_bsdf(mat, e.wi, wo, model);
    let f = match part {
        0 => f.total(),
        1 => f.diffuse,
        _ => f.specular,
    };
    let cos = mat.normal.dot(Vec3::lift(e.wi)).max(S::cst(0.0));
    f.scale(cos * e.k)
}

/// Value an edge's target supplies (before the edge's own factor).
#[inline]
pub(crate) fn target_value(params: &ParamSet, chunk: &TapeChunk, node: &Node, e: &Edge) -> Rgb {
    match e.target {
        Target::Env => params.env.lookup(e.wi).0,
        Target::Cache => params.materials[node.material as usize].cache.lookup(node.uv).0,
        Target::Child(c) => node_value(params, chunk, c).0,
    }
}

/// Radiance and diffuse-channel sums of a node's edges.
pub(crate) fn node_value(params: &ParamSet, chunk: &TapeChunk, id: u32) -> (Rgb, Rgb) {
    let node = &chunk.nodes[id as usize];
    let mat = material_f64(params, node);
    let mut rad = Vec3::ZERO;
    let mut diff = Vec3::ZERO;
    for e in &chunk.edges[node.edges.0 as usize..node.edges.1 as usize] {
        let c = edge_beta(&mat, node.wo, e).mul_elem(target_value(params, chunk, node, e));
        if e.diffuse_channel {
            diff += c;
        } else {
            rad += c;
        }
    }
    (rad, diff)
}

impl Tape {
    pub(crate) fn new(width: usize, height: usize, chunks: Vec<TapeChunk>, params: &ParamSet) -> Self {
        Self { width, height, chunks, signature: Signature::of(params) }
    }

    pub fn node_count(&self) -> usize {
        self.chunks.iter().map(|c| c.nodes.len()).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.chunks.iter().map(|c| c.edges.len()).sum()
    }

    fn check(&self, params: &ParamSet) -> Result<()> {
        if Signature::of(params) != self.signature {
            return Err(Error::TapeMismatch("texture shapes differ from the recorded ones".into()));
        }
        Ok(())
    }

    /// Recomputes the radiance and diffuse buffers from the tape.
    pub fn replay(&self, params: &ParamSet) -> Result<(Vec<Rgb>, Vec<Rgb>)> {
        self.check(params)?;
        let n = self.width * self.height;
        let mut rad = vec![Vec3::ZERO; n];
        let mut diff = vec![Vec3::ZERO; n];
        for chunk in &self.chunks {
            for px in &chunk.pixels {
                let mut sum = Vec3::ZERO;
                let mut dsum = Vec3::ZERO;
                let range = px.first_sample as usize..(px.first_sample + px.samples) as usize;
                for s in &chunk.samples[range] {
                    let (l, ld) = match s.root {
                        Root::Miss(dir) => (params.env.lookup(dir).0, Vec3::ZERO),
                        Root::Node(id) => node_value(params, chunk, id),
                    };
                    sum += l * s.scale;
                    dsum += ld * s.diffuse_scale;
                }
                if px.samples > 0 {
                    rad[px.pixel as usize] = sum / px.samples as f64;
                    diff[px.pixel as usize] = dsum / px.samples as f64;
                }
            }
        }
        Ok((rad, diff))
    }

    /// Gradient of `sum_p <d_rad[p], C[p]> + <d_diff[p], C_diff[p]>` with
    /// respect to every texel, sampling decisions held fixed.
    pub fn backward(&self, params: &ParamSet, d_rad: &[Rgb], d_diff: &[Rgb]) -> Result<GradBuffer> {
        self.check(params)?;
        let n = self.width * self.height;
        if d_rad.len() != n || d_diff.len() != n {
            return Err(Error::TapeMismatch(format!("adjoint buffers need {n} pixels")));
        }
        let groups = BACKWARD_GROUPS.min(self.chunks.len()).max(1);
        let per = self.chunks.len().div_ceil(groups);
        let run = |g: usize| {
            let mut grads = GradBuffer::zeros_like(params);
            for chunk in self.chunks.iter().skip(g * per).take(per) {
                backward_chunk(params, chunk, d_rad, d_diff, &mut grads);
            }
            grads
        };
        let parts: Vec<GradBuffer> = crate::parallel::map_indices(groups, run);
        let mut total = GradBuffer::zeros_like(params);
        // Fixed group layout and merge order keep the result independent of
        // the worker count.
        for p in &parts {
            total.merge(p);
        }
        Ok(total)
    }
}

const BACKWARD_GROUPS: usize = 16;

fn splat(tex: &Texture2D, grad: &mut [f64], fp: &Footprint, channel: usize, g: f64) {
    for (t, w) in fp.iter() {
        grad[t * tex.channels + channel] += w * g;
    }
}

fn splat_rgb(tex: &Texture2D, grad: &mut [f64], fp: &Footprint, a: Rgb) {
    for (t, w) in fp.iter() {
        let base = t * tex.channels;
        grad[base] += w * a.x;
        grad[base + 1] += w * a.y;
        grad[base + 2] += w * a.z;
    }
}

fn backward_chunk(params: &ParamSet, chunk: &TapeChunk, d_rad: &[Rgb], d_diff: &[Rgb], grads: &mut GradBuffer) {
    for px in &chunk.pixels {
        if px.samples == 0 {
            continue;
        }
        let inv = 1.0 / px.samples as f64;
        let a_rad = d_rad[px.pixel as usize] * inv;
        let a_diff = d_diff[px.pixel as usize] * inv;
        if a_rad == Vec3::ZERO && a_diff == Vec3::ZERO {
            continue;
        }
        let range = px.first_sample as usize..(px.first_sample + px.samples) as usize;
        for s in &chunk.samples[range] {
            let ar = a_rad * s.scale;
            let ad = a_diff * s.diffuse_scale;
            match s.root {
                Root::Miss(dir) => {
                    let fp = params.env.radiance.footprint(crate::assets::EnvironmentMap::direction_to_uv(dir));
                    splat_rgb(&params.env.radiance, &mut grads.env, &fp, ar);
                }
                Root::Node(id) => backward_node(params, chunk, id, ar, ad, grads),
            }
            grads.accumulated += 1;
        }
    }
}

fn backward_node(params: &ParamSet, chunk: &TapeChunk, id: u32, a_rad: Rgb, a_diff: Rgb, grads: &mut GradBuffer) {
    let node = &chunk.nodes[id as usize];
    let m = node.material as usize;
    let mat = material_at::<D>(params, node, D::var);
    let mut local = [0.0; LOCAL_VARS];
    for e in &chunk.edges[node.edges.0 as usize..node.edges.1 as usize] {
        let a = if e.diffuse_channel { a_diff } else { a_rad };
        if a == Vec3::ZERO {
            continue;
        }
        let value = target_value(params, chunk, node, e);
        let beta = edge_beta(&mat, node.wo, e);
        if e.lobe != Lobe::Unit {
            for (c, b) in [(a.x * value.x, beta.x), (a.y * value.y, beta.y), (a.z * value.z, beta.z)] {
                if c != 0.0 {
                    for (l, d) in local.iter_mut().zip(b.d) {
                        *l += c * d;
                    }
                }
            }
        }
        let down = Vec3::new(a.x * beta.x.v, a.y * beta.y.v, a.z * beta.z.v);
        match e.target {
            Target::Env => {
                let fp = params.env.radiance.footprint(crate::assets::EnvironmentMap::direction_to_uv(e.wi));
                splat_rgb(&params.env.radiance, &mut grads.env, &fp, down);
            }
            Target::Cache => {
                let tex = &params.materials[m].cache.tex;
                let fp = tex.footprint(node.uv);
                splat_rgb(tex, &mut grads.materials[m].cache, &fp, down);
            }
            Target::Child(c) => backward_node(params, chunk, c, down, Vec3::ZERO, grads),
        }
    }
    if local.iter().all(|g| *g == 0.0) {
        return;
    }
    let mp = &params.materials[m];
    let g = &mut grads.materials[m];
    let fp = mp.kd.footprint(node.uv);
    splat_rgb(&mp.kd, &mut g.kd, &fp, Vec3::new(local[0], local[1], local[2]));
    let fp = mp.orm.footprint(node.uv);
    splat(&mp.orm, &mut g.orm, &fp, 1, local[3]);
    splat(&mp.orm, &mut g.orm, &fp, 2, local[4]);
    let fp = mp.normal.footprint(node.uv);
    splat_rgb(&mp.normal, &mut g.normal, &fp, Vec3::new(local[5], local[6], local[7]));
}
