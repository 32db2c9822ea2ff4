use std::time::Instant;

use super::config::RenderConfig;
use super::image::{RadianceImage, RenderStats};
use super::tape::{
    edge_beta, material_f64, Edge, Lobe, Node, PixelRecord, Root, SampleRecord, Tape, TapeChunk, Target,
};
use crate::assets::ParamSet;
use crate::brdf::{DiffuseModel, SurfaceMaterial};
use crate::camera::Camera;
use crate::error::Result;
use crate::geometry::{Geometry, Hit};
use crate::math::{Rgb, Vec3};
use crate::sampling::{cosine_hemisphere_from, cosine_hemisphere_pdf, ggx_from, ggx_pdf, Rng};

/// Which BSDF sampling rule a shading point uses.
#[derive(Clone, Copy)]
enum Shading {
    /// MIS over environment and BSDF samples with these counts.
    Mis { n_light: u32, n_brdf: u32, model: DiffuseModel },
    /// Cache read plus this many specular-lobe samples.
    Adaptive { n_spec: u32 },
}

struct Ctx<'a> {
    geom: &'a Geometry,
    params: &'a ParamSet,
    /// Parameters that drive sampling decisions and densities.
    sampling: &'a ParamSet,
    detached: bool,
    cfg: &'a RenderConfig,
}

/// Probability of picking the GGX lobe when sampling the BSDF.
fn specular_probability(m: &SurfaceMaterial) -> f64 {
    if m.specular_weight <= 0.0 {
        return 0.0;
    }
    let s = m.f0().luminance() * m.specular_weight;
    let d = m.diffuse_albedo().luminance();
    if d <= 0.0 {
        return 1.0;
    }
    (s / (s + d)).clamp(0.25, 0.9)
}

fn bsdf_pdf(m: &SurfaceMaterial, p_spec: f64, wo: Vec3, wi: Vec3) -> f64 {
    let mut p = 0.0;
    if p_spec > 0.0 {
        p += p_spec * ggx_pdf(m.normal, wo, wi, m.roughness);
    }
    if p_spec < 1.0 {
        p += (1.0 - p_spec) * cosine_hemisphere_pdf(m.normal, wi);
    }
    p
}

fn make_node(ctx: &Ctx, hit: &Hit, wo: Vec3) -> Node {
    let mut n = hit.shading_normal;
    if hit.geometric_normal.dot(wo) < 0.0 {
        n = -n;
    }
    let f = hit.tangent_frame(&ctx.geom.mesh, n);
    Node { material: hit.material_id, uv: hit.uv, wo, n: f.n, s: f.s, t: f.t, edges: (0, 0) }
}

struct Tracer<'a, 'b> {
    ctx: &'a Ctx<'a>,
    tape: Option<&'b mut TapeChunk>,
    rays: u64,
}

impl Tracer<'_, '_> {
    /// Radiance leaving `hit` toward `wo`, plus the diffuse-channel sum at the
    /// first hit. `level` counts surface interactions from 1.
    fn shade(&mut self, hit: &Hit, wo: Vec3, level: u32, rng: &mut Rng) -> (Rgb, Rgb, u32) {
        let ctx = self.ctx;
        let cfg = ctx.cfg;
        let node = make_node(ctx, hit, wo);
        let id = match self.tape.as_deref_mut() {
            Some(t) => {
                t.nodes.push(node);
                (t.nodes.len() - 1) as u32
            }
            None => 0,
        };
        let mat = material_f64(ctx.params, &node);
        let smat = if ctx.detached { material_f64(ctx.sampling, &node) } else { mat };
        let deepest = level == cfg.depth;
        let primary = level == 1;

        let shading = if primary {
            Shading::Mis { n_light: cfg.n_light, n_brdf: cfg.n_brdf, model: cfg.primary_model }
        } else if cfg.adaptive && (deepest || cfg.cache_every_bounce) {
            Shading::Adaptive { n_spec: cfg.n_spec_secondary }
        } else {
            Shading::Mis { n_light: cfg.n_light_secondary, n_brdf: cfg.n_brdf_secondary, model: DiffuseModel::Lambert }
        };

        let mut edges: Vec<Edge> = Vec::new();
        let recording = self.tape.is_some();
        let mut rad = Vec3::ZERO;
        let mut diff = Vec3::ZERO;

        // Adds one edge's contribution and records it in sample order.
        let mut push = |e: Edge, value: Rgb, rad: &mut Rgb, diff: &mut Rgb| {
            let c = edge_beta(&mat, wo, &e).mul_elem(value);
            if e.diffuse_channel {
                *diff += c;
            } else {
                *rad += c;
            }
            if recording {
                edges.push(e);
            }
        };

        match shading {
            Shading::Mis { n_light, n_brdf, model } => {
                let p_spec = specular_probability(&smat);
                let (nl, nb) = (n_light as f64, n_brdf as f64);
                let env = &ctx.sampling.env;
                for j in 0..n_light + n_brdf {
                    let wi = if j < n_light {
                        let ds = env.sample_direction(rng.next_2d());
                        if !ds.is_valid() {
                            continue;
                        }
                        ds.direction
                    } else {
                        let u_lobe = rng.next_f64();
                        let u = rng.next_2d();
                        let ds = if u_lobe < p_spec {
                            ggx_from(smat.normal, wo, smat.roughness, u)
                        } else {
                            cosine_hemisphere_from(smat.normal, u)
                        };
                        if !ds.is_valid() {
                            continue;
                        }
                        ds.direction
                    };
                    if smat.normal.dot(wi) <= 0.0 {
                        continue;
                    }
                    let light_pdf = if n_light > 0 { nl * env.pdf(wi) } else { 0.0 };
                    let brdf_pdf = if n_brdf > 0 { nb * bsdf_pdf(&smat, p_spec, wo, wi) } else { 0.0 };
                    let denom = light_pdf + brdf_pdf;
                    if !(denom > 0.0) {
                        continue;
                    }
                    let k = 1.0 / denom;
                    let target = self.follow(hit, wi, level, rng);
                    let Some((target, value)) = target else { continue };
                    let unoccluded = target == Target::Env;
                    push(Edge { wi, k, lobe: Lobe::Total(model), target, diffuse_channel: false }, value, &mut rad, &mut diff);
                    if primary && unoccluded {
                        push(Edge { wi, k, lobe: Lobe::Diffuse, target, diffuse_channel: true }, value, &mut rad, &mut diff);
                    }
                }
            }
            Shading::Adaptive { n_spec } => {
                let cache = ctx.params.materials[node.material as usize].cache.lookup(node.uv).0;
                push(Edge { wi: wo, k: 1.0, lobe: Lobe::Unit, target: Target::Cache, diffuse_channel: false }, cache, &mut rad, &mut diff);
                if smat.specular_weight > 0.0 && n_spec > 0 {
                    for _ in 0..n_spec {
                        let ds = ggx_from(smat.normal, wo, smat.roughness, rng.next_2d());
                        if !ds.is_valid() {
                            continue;
                        }
                        let wi = ds.direction;
                        let k = 1.0 / (n_spec as f64 * ds.pdf);
                        let Some((target, value)) = self.follow(hit, wi, level, rng) else { continue };
                        push(Edge { wi, k, lobe: Lobe::Specular, target, diffuse_channel: false }, value, &mut rad, &mut diff);
                    }
                }
            }
        }

        if let Some(t) = self.tape.as_deref_mut() {
            let start = t.edges.len() as u32;
            t.edges.extend_from_slice(&edges);
            t.nodes[id as usize].edges = (start, t.edges.len() as u32);
        }
        (rad, diff, id)
    }

    /// Traces `wi` from `hit`: the environment when unoccluded, the shaded
    /// blocker when depth remains, nothing otherwise.
    fn follow(&mut self, hit: &Hit, wi: Vec3, level: u32, rng: &mut Rng) -> Option<(Target, Rgb)> {
        let ctx = self.ctx;
        let origin = ctx.geom.spawn_origin(hit, wi);
        self.rays += 1;
        if level < ctx.cfg.depth {
            match ctx.geom.trace(origin, wi) {
                None => Some((Target::Env, ctx.params.env.lookup(wi).0)),
                Some(h2) => {
                    let (l, _, child) = self.shade(&h2, -wi, level + 1, rng);
                    Some((Target::Child(child), l))
                }
            }
        } else if ctx.geom.occluded(origin, wi) {
            None
        } else {
            Some((Target::Env, ctx.params.env.lookup(wi).0))
        }
    }
}

/// Solid-angle mean luminance of the environment.
pub fn mean_env_luminance(params: &ParamSet) -> f64 {
    let env = &params.env;
    let mut sum = 0.0;
    for j in 0..env.height() {
        let w = env.texel_solid_angle(j);
        for i in 0..env.width() {
            let t = env.radiance.texel(j * env.width() + i);
            sum += w * Vec3::new(t[0] as f64, t[1] as f64, t[2] as f64).luminance();
        }
    }
    sum / (4.0 * crate::math::PI)
}

fn clamp_scale(l: Rgb, ceiling: f64) -> f64 {
    let m = l.max_component();
    if m > ceiling {
        ceiling / m
    } else {
        1.0
    }
}

struct TileOut {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    img: RadianceImage,
    tape: Option<TapeChunk>,
}

fn render_tile(ctx: &Ctx, camera: &Camera, seed: u64, ceiling: f64, rect: (usize, usize, usize, usize), record: bool) -> TileOut {
    let (x0, y0, w, h) = rect;
    let mut img = RadianceImage::new(w, h);
    let mut chunk = record.then(TapeChunk::default);
    let mut stats = RenderStats::default();
    let mut tracer_rays = 0u64;
    for ly in 0..h {
        for lx in 0..w {
            let (px, py) = (x0 + lx, y0 + ly);
            let pixel = py * camera.width + px;
            let local = ly * w + lx;

            let (o, d) = camera.ray(px as f64 + 0.5, py as f64 + 0.5);
            let center = ctx.geom.trace(o, d);
            tracer_rays += 1;
            if let Some(c) = &center {
                img.uv[local] = c.uv;
                img.material[local] = c.material_id as i32;
                img.position[local] = c.position;
            }

            let first_sample = chunk.as_ref().map_or(0, |c| c.samples.len() as u32);
            let mut sum = Vec3::ZERO;
            let mut dsum = Vec3::ZERO;
            let mut sq = Vec3::ZERO;
            let mut n_valid = 0u32;
            let mut coverage = 0u32;
            for s in 0..ctx.cfg.spp {
                let mut rng = Rng::derive(seed, &[pixel as u64, s as u64]);
                let j = rng.next_2d();
                let (o, d) = camera.ray(px as f64 + j[0], py as f64 + j[1]);
                stats.camera_samples += 1;
                tracer_rays += 1;
                let cp = chunk.as_ref().map(|c| c.checkpoint());
                let mut tracer = Tracer { ctx, tape: chunk.as_mut(), rays: 0 };
                let (l, ld, root, mat) = match ctx.geom.trace(o, d) {
                    None => (ctx.params.env.lookup(d).0, Vec3::ZERO, Root::Miss(d), -1),
                    Some(hit) => {
                        let (l, ld, id) = tracer.shade(&hit, -d, 1, &mut rng);
                        (l, ld, Root::Node(id), hit.material_id as i32)
                    }
                };
                tracer_rays += tracer.rays;
                if !(l.is_finite() && ld.is_finite()) {
                    stats.nan_samples += 1;
                    if let (Some(c), Some(cp)) = (chunk.as_mut(), cp) {
                        c.rollback(cp);
                    }
                    continue;
                }
                let scale = clamp_scale(l, ceiling);
                let diffuse_scale = clamp_scale(ld, ceiling);
                let lc = l * scale;
                sum += lc;
                dsum += ld * diffuse_scale;
                sq += lc.mul_elem(lc);
                n_valid += 1;
                if mat >= 0 && mat == img.material[local] {
                    coverage += 1;
                }
                if let Some(c) = chunk.as_mut() {
                    c.samples.push(SampleRecord { root, scale, diffuse_scale });
                }
            }
            if let Some(c) = chunk.as_mut() {
                c.pixels.push(PixelRecord { pixel: pixel as u32, first_sample, samples: n_valid });
            }
            if n_valid > 0 {
                let n = n_valid as f64;
                img.radiance[local] = sum / n;
                img.diffuse[local] = dsum / n;
                if n_valid > 1 {
                    let mean = sum / n;
                    let v = (sq / n - mean.mul_elem(mean)) * (n / (n - 1.0));
                    img.variance[local] = v.max_elem(Vec3::ZERO);
                }
            }
            img.sample_count[local] = n_valid;
            img.coverage[local] = coverage;
        }
    }
    stats.rays = tracer_rays;
    img.stats = stats;
    TileOut { x0, y0, w, h, img, tape: chunk }
}

// wasm32-unknown-unknown has no clock; browser renders report 0 s.
#[cfg(not(target_arch = "wasm32"))]
fn clock() -> Option<Instant> {
    Some(Instant::now())
}

#[cfg(target_arch = "wasm32")]
fn clock() -> Option<Instant> {
    None
}

fn render_impl(
    geom: &Geometry,
    params: &ParamSet,
    sampling: Option<&ParamSet>,
    camera: &Camera,
    cfg: &RenderConfig,
    seed: u64,
    record: bool,
) -> Result<(RadianceImage, Option<Tape>)> {
    cfg.validate()?;
    let start = clock();
    let ctx = Ctx { geom, params, sampling: sampling.unwrap_or(params), detached: sampling.is_some(), cfg };
    let ceiling = {
        let m = mean_env_luminance(params);
        if m > 0.0 { cfg.firefly * m } else { f64::INFINITY }
    };
    let ts = cfg.tile as usize;
    let (tw, th) = (camera.width.div_ceil(ts), camera.height.div_ceil(ts));
    let rects: Vec<(usize, usize, usize, usize)> = (0..tw * th)
        .map(|i| {
            let (x0, y0) = ((i % tw) * ts, (i / tw) * ts);
            (x0, y0, ts.min(camera.width - x0), ts.min(camera.height - y0))
        })
        .collect();
    let tiles = crate::parallel::map_indices(rects.len(), |i| render_tile(&ctx, camera, seed, ceiling, rects[i], record));

    let mut img = RadianceImage::new(camera.width, camera.height);
    let mut chunks = Vec::new();
    for t in tiles {
        for ly in 0..t.h {
            for lx in 0..t.w {
                let src = ly * t.w + lx;
                let dst = (t.y0 + ly) * camera.width + t.x0 + lx;
                img.radiance[dst] = t.img.radiance[src];
                img.diffuse[dst] = t.img.diffuse[src];
                img.variance[dst] = t.img.variance[src];
                img.sample_count[dst] = t.img.sample_count[src];
                img.uv[dst] = t.img.uv[src];
                img.material[dst] = t.img.material[src];
                img.position[dst] = t.img.position[src];
                img.coverage[dst] = t.img.coverage[src];
            }
        }
        img.stats.merge(&t.img.stats);
        if let Some(c) = t.tape {
            chunks.push(c);
        }
    }
    img.stats.seconds = start.map_or(0.0, |s| s.elapsed().as_secs_f64());
    let tape = record.then(|| Tape::new(camera.width, camera.height, chunks, params));
    Ok((img, tape))
}

/// Renders `camera`'s view; deterministic in `seed` for any worker count.
pub fn render(geom: &Geometry, params: &ParamSet, camera: &Camera, cfg: &RenderConfig, seed: u64) -> Result<RadianceImage> {
    Ok(render_impl(geom, params, None, camera, cfg, seed, false)?.0)
}

/// Like [`render`], also recording the path tape for replay and gradients.
///
/// With `sampling` given, directions, densities and MIS weights come from
/// those parameters while radiance is evaluated with `params`.
pub fn render_with_tape(
    geom: &Geometry,
    params: &ParamSet,
    sampling: Option<&ParamSet>,
    camera: &Camera,
    cfg: &RenderConfig,
    seed: u64,
) -> Result<(RadianceImage, Tape)> {
    let (img, tape) = render_impl(geom, params, sampling, camera, cfg, seed, true)?;
    Ok((img, tape.expect("recording requested")))
}

/// [`render`] with sampling driven by `sampling` instead of `params`.
pub fn render_detached(
    geom: &Geometry,
    params: &ParamSet,
    sampling: &ParamSet,
    camera: &Camera,
    cfg: &RenderConfig,
    seed: u64,
) -> Result<RadianceImage> {
    Ok(render_impl(geom, params, Some(sampling), camera, cfg, seed, false)?.0)
}

/// One unclamped radiance estimate along a ray: `(radiance, diffuse share)`.
pub fn estimate_radiance(geom: &Geometry, params: &ParamSet, cfg: &RenderConfig, origin: Vec3, dir: Vec3, rng: &mut Rng) -> (Rgb, Rgb) {
    let ctx = Ctx { geom, params, sampling: params, detached: false, cfg };
    match geom.trace(origin, dir) {
        None => (params.env.lookup(dir).0, Vec3::ZERO),
        Some(hit) => {
            let (l, ld, _) = Tracer { ctx: &ctx, tape: None, rays: 0 }.shade(&hit, -dir, 1, rng);
            (l, ld)
        }
    }
}
