//! Shared fixtures: an independent brute-force path tracer used as the
//! high-depth reference, and small scene builders.
#![allow(dead_code)]

use refmc::assets::{apply_normal_map, EnvironmentMap, MaterialParams, ParamSet, Texture2D};
use refmc::brdf::{eval_bsdf, DiffuseModel, SurfaceMaterial};
use refmc::camera::Camera;
use refmc::geometry::{Geometry, Hit, TriangleMesh};
use refmc::math::{vec3, Rgb, Vec3};
use refmc::parallel::map_indices;
use refmc::sampling::{cosine_hemisphere_from, cosine_hemisphere_pdf, ggx_from, ggx_pdf, Rng};

/// Material at a hit, rebuilt from the raw textures. The shading frame
/// faces the side `wo` arrives from.
pub fn material_at_hit(geom: &Geometry, params: &ParamSet, hit: &Hit, wo: Vec3) -> SurfaceMaterial {
    let mp = &params.materials[hit.material_id as usize];
    let kd = mp.kd.lookup(hit.uv).0;
    let orm = mp.orm.lookup(hit.uv).0;
    let nt = mp.normal.lookup(hit.uv).0;
    let mut n = hit.shading_normal;
    if hit.geometric_normal.dot(wo) < 0.0 {
        n = -n;
    }
    let f = hit.tangent_frame(&geom.mesh, n);
    SurfaceMaterial {
        base_color: vec3(kd[0], kd[1], kd[2]),
        roughness: orm[1],
        metalness: orm[2],
        occlusion: orm[0],
        normal: apply_normal_map(f.s, f.t, f.n, vec3(nt[0], nt[1], nt[2])),
        specular_weight: mp.specular_weight,
    }
}

/// Unidirectional path tracing with BSDF sampling only and no radiance
/// clamp; `max_depth` counts surface interactions. Lambertian diffuse.
pub fn trace_path(geom: &Geometry, params: &ParamSet, mut o: Vec3, mut d: Vec3, max_depth: u32, rng: &mut Rng) -> Rgb {
    let mut beta = Vec3::ONE;
    for _ in 0..max_depth {
        let Some(hit) = geom.trace(o, d) else {
            return beta.mul_elem(params.env.lookup(d).0);
        };
        let wo = -d;
        let m = material_at_hit(geom, params, &hit, wo);
        let p_spec = if m.specular_weight <= 0.0 {
            0.0
        } else if m.diffuse_albedo().max_component() <= 0.0 {
            1.0
        } else {
            0.5
        };
        let u = rng.next_f64();
        let uv = rng.next_2d();
        let ds = if u < p_spec { ggx_from(m.normal, wo, m.roughness, uv) } else { cosine_hemisphere_from(m.normal, uv) };
        let wi = ds.direction;
        let cos = m.normal.dot(wi);
        if !ds.is_valid() || cos <= 0.0 {
            return Vec3::ZERO;
        }
        let mut pdf = (1.0 - p_spec) * cosine_hemisphere_pdf(m.normal, wi);
        if p_spec > 0.0 {
            pdf += p_spec * ggx_pdf(m.normal, wo, wi, m.roughness);
        }
        if !(pdf > 0.0) {
            return Vec3::ZERO;
        }
        beta = beta.mul_elem(eval_bsdf(&m, wi, wo, DiffuseModel::Lambert).total()) * (cos / pdf);
        o = geom.spawn_origin(&hit, wi);
        d = wi;
    }
    // Path budget exhausted: the remaining bounce gets no light.
    Vec3::ZERO
}

/// Per-pixel mean of `spp` reference paths with jittered camera rays.
pub fn reference_image(geom: &Geometry, params: &ParamSet, cam: &Camera, spp: u32, depth: u32, seed: u64) -> Vec<Rgb> {
    map_indices(cam.width * cam.height, |p| {
        let (px, py) = (p % cam.width, p / cam.width);
        let mut sum = Vec3::ZERO;
        for s in 0..spp {
            let mut rng = Rng::derive(seed, &[p as u64, s as u64, 0xEEF]);
            let j = rng.next_2d();
            let (o, d) = cam.ray(px as f64 + j[0], py as f64 + j[1]);
            let l = trace_path(geom, params, o, d, depth, &mut rng);
            if l.is_finite() {
                sum += l;
            }
        }
        sum / spp as f64
    })
}

pub fn lambert(albedo: Vec3) -> MaterialParams {
    let mut m = MaterialParams::constant(albedo, 1.0, 0.0, 8, 32);
    m.specular_weight = 0.0;
    m
}

/// Sky brighter toward +y, dimmer toward the ground.
pub fn sky(width: usize, height: usize, zenith: Vec3, horizon: Vec3, ground: Vec3) -> EnvironmentMap {
    let mut data = Vec::with_capacity(width * height * 3);
    for j in 0..height {
        for i in 0..width {
            let d = EnvironmentMap::uv_to_direction([(i as f64 + 0.5) / width as f64, (j as f64 + 0.5) / height as f64]);
            let c = if d.y >= 0.0 { horizon.lerp(zenith, d.y) } else { horizon.lerp(ground, (-d.y).min(1.0).sqrt()) };
            data.extend([c.x as f32, c.y as f32, c.z as f32]);
        }
    }
    EnvironmentMap::new(Texture2D::new(width, height, 3, data).unwrap()).unwrap()
}

/// Two facing glossy metal walls with a diffuse ball and floor between
/// them. Materials: 0 floor, 1 left wall, 2 right wall, 3 ball.
pub fn mirror_corridor(wall_reflectance: f64, wall_roughness: f64, diffuse_scale: f64) -> (Geometry, ParamSet) {
    let mut mesh = TriangleMesh::quad(vec3(-1.2, 0.0, 1.5), vec3(2.4, 0.0, 0.0), vec3(0.0, 0.0, -3.0), 4);
    mesh.set_material(0);
    let mut left = TriangleMesh::quad(vec3(-1.2, 0.0, -1.5), vec3(0.0, 0.0, 3.0), vec3(0.0, 1.6, 0.0), 1);
    left.set_material(1);
    let mut right = TriangleMesh::quad(vec3(1.2, 0.0, 1.5), vec3(0.0, 0.0, -3.0), vec3(0.0, 1.6, 0.0), 1);
    right.set_material(2);
    let mut ball = TriangleMesh::sphere(vec3(0.0, 0.4, 0.0), 0.4, 48, 24);
    ball.set_material(3);
    for m in [&left, &right, &ball] {
        mesh.append(m);
    }
    let geom = Geometry::new(mesh).unwrap();
    let wall = || {
        let mut m = MaterialParams::constant(Vec3::splat(wall_reflectance), wall_roughness, 1.0, 8, 32);
        m.specular_weight = 1.0;
        m
    };
    let params = ParamSet {
        materials: vec![lambert(vec3(0.5, 0.5, 0.45) * diffuse_scale), wall(), wall(), lambert(vec3(0.75, 0.35, 0.2) * diffuse_scale)],
        env: sky(64, 32, vec3(0.6, 0.8, 1.4), vec3(1.2, 1.1, 1.0), vec3(0.15, 0.12, 0.1)),
    };
    (geom, params)
}

pub fn corridor_camera(width: usize, height: usize) -> Camera {
    Camera::look_at(vec3(0.0, 1.1, 3.2), vec3(0.0, 0.35, 0.0), Vec3::Y, 0.9, width, height).unwrap()
}
