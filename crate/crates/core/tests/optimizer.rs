mod common;

use common::lambert;
use refmc::assets::{EnvironmentMap, ParamSet};
use refmc::camera::Camera;
use refmc::geometry::{Geometry, TriangleMesh};
use refmc::integrator::{render, RenderConfig};
use refmc::math::{vec3, Vec3};
use refmc::optimizer::{optimize, Dataset, OptimConfig, TrainMask, View};
use refmc::parallel::with_threads;

fn ring_views(geom: &Geometry, params: &ParamSet, n: usize, size: usize, spp: u32) -> Vec<View> {
    let cfg = RenderConfig { spp, depth: 2, adaptive: false, ..RenderConfig::default() };
    (0..n)
        .map(|i| {
            let a = i as f64 / n as f64 * std::f64::consts::TAU;
            let eye = vec3(2.6 * a.cos(), 1.2, 2.6 * a.sin());
            let camera = Camera::look_at(eye, Vec3::ZERO, Vec3::Y, 0.8, size, size).unwrap();
            let image = render(geom, params, &camera, &cfg, 1000 + i as u64).unwrap().radiance;
            View { name: format!("v{i}"), camera, image }
        })
        .collect()
}

fn dataset(train: Vec<View>) -> Dataset {
    let (width, height) = (train[0].camera.width, train[0].camera.height);
    Dataset { train, test: Vec::new(), width, height }
}

fn sphere() -> Geometry {
    Geometry::new(TriangleMesh::sphere(Vec3::ZERO, 0.7, 32, 16)).unwrap()
}

#[test]
fn ground_truth_is_a_fixed_point() {
    with_threads(2, || {
        let geom = sphere();
        let gt = ParamSet { materials: vec![lambert(vec3(0.6, 0.45, 0.3))], env: EnvironmentMap::constant(16, 8, vec3(1.0, 1.0, 1.0)) };
        let data = dataset(ring_views(&geom, &gt, 4, 24, 256));
        let mut params = gt.clone();
        let ocfg = OptimConfig {
            // Start from a converged cache too.
            iterations: 160,
            warmup: 100,
            train: TrainMask { kd: true, orm: false, normal: false, env: false, cache: true },
            ..OptimConfig::default()
        };
        let rcfg = RenderConfig { spp: 8, ..RenderConfig::default() };
        let report = optimize(&geom, &mut params, &data, &ocfg, &rcfg, None).unwrap();

        let before = &gt.materials[0].kd.data;
        let after = &params.materials[0].kd.data;
        // Texels jitter by about the learning rate under MC noise; what must
        // not happen is a systematic walk away from the truth.
        for c in 0..3 {
            let d: Vec<f64> = before.iter().zip(after).skip(c).step_by(4).map(|(a, b)| (b - a) as f64).collect();
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            let max = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(mean.abs() < 1e-2 && max < 0.1, "channel {c}: mean drift {mean}, max {max}");
        }
        let psnr: Vec<f64> = report.metrics.iter().map(|m| m.psnr).collect();
        assert!(psnr[100..].iter().all(|p| *p > 35.0), "{psnr:?}");
    });
}

#[test]
fn recovers_constant_environment() {
    with_threads(2, || {
        let geom = sphere();
        let truth = vec3(1.4, 1.2, 0.9);
        let gt = ParamSet { materials: vec![lambert(Vec3::ONE * 0.9)], env: EnvironmentMap::constant(8, 4, truth) };
        let data = dataset(ring_views(&geom, &gt, 6, 24, 256));
        let mut params = ParamSet { env: EnvironmentMap::constant(8, 4, Vec3::ONE * 0.5), ..gt.clone() };
        let ocfg = OptimConfig {
            iterations: 200,
            warmup: 0,
            w_diff: 0.0,
            train: TrainMask { kd: false, orm: false, normal: false, env: true, cache: false },
            ..OptimConfig::default()
        };
        let rcfg = RenderConfig { spp: 4, ..RenderConfig::default() };
        optimize(&geom, &mut params, &data, &ocfg, &rcfg, None).unwrap();

        let env = &params.env.radiance;
        let mean: Vec<f64> = (0..3).map(|c| env.data.iter().skip(c).step_by(env.channels).map(|v| *v as f64).sum::<f64>() / env.texel_count() as f64).collect();
        for (m, t) in mean.iter().zip(truth.to_array()) {
            assert!((m / t - 1.0).abs() < 0.02, "env mean {mean:?} vs {truth:?}");
        }
    });
}
