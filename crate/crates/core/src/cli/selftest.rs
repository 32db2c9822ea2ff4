//! Small, fast versions of the oracle checks, runnable from the CLI.

use crate::assets::{EnvironmentMap, GradBuffer, MaterialParams, ParamLeaf, ParamSet};
use crate::brdf::DiffuseModel;
use crate::camera::Camera;
use crate::geometry::{Geometry, TriangleMesh};
use crate::integrator::{psnr, render, render_detached, render_with_tape, RenderConfig};
use crate::math::{vec3, Vec3};
use crate::scene_desc::SceneDescription;

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn lambert_sphere(albedo: f64) -> (Geometry, ParamSet) {
    let geom = Geometry::new(TriangleMesh::sphere(Vec3::ZERO, 1.0, 48, 24)).expect("sphere");
    let mut m = MaterialParams::constant(Vec3::splat(albedo), 1.0, 0.0, 4, 4);
    m.specular_weight = 0.0;
    (geom, ParamSet { materials: vec![m], env: EnvironmentMap::constant(16, 8, Vec3::ONE) })
}

fn furnace() -> Check {
    let (geom, params) = lambert_sphere(0.7);
    let cam = Camera::look_at(vec3(0.0, 0.0, 4.0), Vec3::ZERO, Vec3::Y, 0.6, 32, 32).expect("camera");
    let cfg = RenderConfig {
        spp: 64,
        depth: 1,
        n_light: 0,
        n_brdf: 1,
        primary_model: DiffuseModel::Lambert,
        firefly: f64::INFINITY,
        ..Default::default()
    };
    let img = render(&geom, &params, &cam, &cfg, 1).expect("render");
    let on: Vec<f64> = (0..img.pixel_count()).filter(|&p| img.fully_covered(p)).map(|p| img.radiance[p].x).collect();
    let mean = on.iter().sum::<f64>() / on.len().max(1) as f64;
    Check { name: "furnace", passed: (mean - 0.7).abs() < 0.02, detail: format!("mean {mean:.5}, expected 0.7") }
}

fn psnr_offset() -> Check {
    let a = vec![Vec3::splat(0.3); 16];
    let p = psnr(&a, &a);
    Check { name: "psnr-identical", passed: p.is_infinite(), detail: format!("{p}") }
}

fn tape_gradient() -> Check {
    let (geom, mut params) = lambert_sphere(0.5);
    params.materials[0].specular_weight = 1.0;
    let cam = Camera::look_at(vec3(0.0, 0.0, 4.0), Vec3::ZERO, Vec3::Y, 0.6, 8, 8).expect("camera");
    let cfg = RenderConfig { spp: 4, depth: 1, firefly: f64::INFINITY, ..Default::default() };
    let (img, tape) = render_with_tape(&geom, &params, None, &cam, &cfg, 3).expect("render");
    let (replayed, _) = tape.replay(&params).expect("replay");
    let exact = replayed == img.radiance;
    let ones = vec![Vec3::ONE; img.pixel_count()];
    let g: GradBuffer = tape.backward(&params, &ones, &vec![Vec3::ZERO; img.pixel_count()]).expect("backward");
    let leaf = ParamLeaf::Env;
    let (i, &a) = g.get(leaf).iter().enumerate().max_by(|x, y| x.1.abs().total_cmp(&y.1.abs())).expect("texels");
    let h = 1e-3;
    let sum = |delta: f32| {
        let mut p = params.clone();
        p.data_mut(leaf)[i] += delta;
        let img = render_detached(&geom, &p, &params, &cam, &cfg, 3).expect("render");
        img.radiance.iter().map(|v| v.x + v.y + v.z).sum::<f64>()
    };
    let fd = (sum(h) - sum(-h)) / (2.0 * h as f64);
    let rel = (fd - a).abs() / a.abs().max(1e-12);
    Check {
        name: "tape-replay-and-gradient",
        passed: exact && rel < 1e-2,
        detail: format!("replay exact {exact}, adjoint {a:.6e} vs fd {fd:.6e}"),
    }
}

fn scene_round_trip() -> Check {
    let text = r#"
[environment]
radiance = [1.0, 1.0, 1.0]

[[material]]
name = "white"

[[mesh]]
material = "white"
sphere = { center = [0.0, 0.0, 0.0], radius = 1.0 }

[[camera]]
eye = [0.0, 0.0, 3.0]
target = [0.0, 0.0, 0.0]
fov_x = 40.0
"#;
    let ok = SceneDescription::parse_str(text, "selftest", None)
        .ok()
        .and_then(|d| SceneDescription::parse_str(&d.to_toml(), "selftest", None).ok().map(|e| e == d))
        .unwrap_or(false);
    Check { name: "scene-round-trip", passed: ok, detail: String::new() }
}

pub fn run_all() -> Vec<Check> {
    vec![furnace(), psnr_offset(), tape_gradient(), scene_round_trip()]
}
