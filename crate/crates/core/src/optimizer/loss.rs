use crate::assets::{GradBuffer, ParamLeaf, ParamSet, Texture2D};
use crate::integrator::{RadianceImage, Tonemap};
use crate::math::{Rgb, Vec3};
use crate::sampling::Rng;

/// Mean squared error between tonemapped images, and its adjoint with
/// respect to `c`.
pub fn loss_rgb(c: &[Rgb], gt: &[Rgb], tonemap: Tonemap) -> (f64, Vec<Rgb>) {
    assert_eq!(c.len(), gt.len(), "loss_rgb needs equal sizes");
    if c.is_empty() {
        return (0.0, Vec::new());
    }
    let norm = 1.0 / (3 * c.len()) as f64;
    let mut sum = 0.0;
    let adj = c
        .iter()
        .zip(gt)
        .map(|(a, b)| {
            let mut ch = |x: f64, y: f64| {
                let r = tonemap.apply(x) - tonemap.apply(y);
                sum += r * r;
                2.0 * norm * r * tonemap.derivative(x)
            };
            Vec3::new(ch(a.x, b.x), ch(a.y, b.y), ch(a.z, b.z))
        })
        .collect();
    (sum * norm, adj)
}

/// Surface uvs of pixels whose center sees `material`, drawn with
/// replacement. Empty when the material is not visible.
pub fn surface_points(img: &RadianceImage, material: usize, n: usize, rng: &mut Rng) -> Vec<[f64; 2]> {
    let visible: Vec<usize> = (0..img.pixel_count()).filter(|&p| img.material[p] == material as i32).collect();
    if visible.is_empty() {
        return Vec::new();
    }
    (0..n).map(|_| img.uv[visible[(rng.next_u64() % visible.len() as u64) as usize]]).collect()
}

/// Mean absolute difference between `tex` at `points` and at randomly
/// offset points (up to `perturb_texels` texels per axis), over the first
/// three channels. Returns the value and per-texel-value adjoints; ties
/// get a zero subgradient.
pub fn loss_smooth(tex: &Texture2D, points: &[[f64; 2]], perturb_texels: f64, rng: &mut Rng) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; tex.data.len()];
    if points.is_empty() {
        return (0.0, grad);
    }
    let ch = tex.channels.min(3);
    let norm = 1.0 / (points.len() * ch) as f64;
    let (du, dv) = (perturb_texels / tex.width as f64, perturb_texels / tex.height as f64);
    let mut sum = 0.0;
    for &uv in points {
        let e = rng.next_2d();
        let moved = [uv[0] + (2.0 * e[0] - 1.0) * du, uv[1] + (2.0 * e[1] - 1.0) * dv];
        let (a, fa) = tex.lookup(uv);
        let (b, fb) = tex.lookup(moved);
        for c in 0..ch {
            let d = a[c] - b[c];
            sum += d.abs();
            let s = if d > 0.0 {
                norm
            } else if d < 0.0 {
                -norm
            } else {
                continue;
            };
            for (t, w) in fa.iter() {
                grad[t * tex.channels + c] += s * w;
            }
            for (t, w) in fb.iter() {
                grad[t * tex.channels + c] -= s * w;
            }
        }
    }
    (sum * norm, grad)
}

/// Self-supervision of the diffuse cache: tonemapped MSE between the
/// rendered diffuse channel and the cache at the same surface points, over
/// fully covered pixels.
///
/// Returns the value, the adjoint of the diffuse channel, and cache-texel
/// adjoints (all other leaves zero).
pub fn loss_diff(img: &RadianceImage, params: &ParamSet, tonemap: Tonemap) -> (f64, Vec<Rgb>, GradBuffer) {
    let mut grads = GradBuffer::zeros_like(params);
    let mut d_diff = vec![Vec3::ZERO; img.pixel_count()];
    let covered: Vec<usize> = (0..img.pixel_count()).filter(|&p| img.fully_covered(p)).collect();
    if covered.is_empty() {
        return (0.0, d_diff, grads);
    }
    let norm = 1.0 / (3 * covered.len()) as f64;
    let mut sum = 0.0;
    for &p in &covered {
        let m = img.material[p] as usize;
        let cache = &params.materials[m].cache;
        let (k, fp) = cache.lookup(img.uv[p]);
        let c = img.diffuse[p];
        let channels = cache.tex.channels;
        let g = grads.get_mut(ParamLeaf::Cache(m));
        let mut adj = [0.0; 3];
        for (i, (x, y)) in [(c.x, k.x), (c.y, k.y), (c.z, k.z)].into_iter().enumerate() {
            let r = tonemap.apply(x) - tonemap.apply(y);
            sum += r * r;
            adj[i] = 2.0 * norm * r * tonemap.derivative(x);
            let dk = -2.0 * norm * r * tonemap.derivative(y);
            for (t, w) in fp.iter() {
                g[t * channels + i] += dk * w;
            }
        }
        d_diff[p] = Vec3::new(adj[0], adj[1], adj[2]);
    }
    grads.accumulated = covered.len() as u64;
    (sum * norm, d_diff, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::{EnvironmentMap, MaterialParams};
    use crate::math::vec3;

    fn random_image(rng: &mut Rng, n: usize, scale: f64) -> Vec<Rgb> {
        (0..n).map(|_| vec3(rng.next_f64(), rng.next_f64(), rng.next_f64()) * scale).collect()
    }

    #[test]
    fn rgb_identical_is_zero() {
        let mut rng = Rng::new(1);
        let a = random_image(&mut rng, 20, 3.0);
        let (l, adj) = loss_rgb(&a, &a, Tonemap::Reinhard);
        assert_eq!(l, 0.0);
        assert!(adj.iter().all(|v| *v == Vec3::ZERO));
    }

    #[test]
    fn rgb_single_pixel_difference() {
        let a = vec![Vec3::ZERO; 10];
        let mut b = a.clone();
        b[4].y = 0.25;
        let (l, _) = loss_rgb(&a, &b, Tonemap::Identity);
        assert!((l - 0.25 * 0.25 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn rgb_adjoint_matches_differences() {
        let mut rng = Rng::new(2);
        let gt = random_image(&mut rng, 50, 4.0);
        let c = random_image(&mut rng, 50, 4.0);
        let (_, adj) = loss_rgb(&c, &gt, Tonemap::Reinhard);
        for _ in 0..10 {
            let p = (rng.next_u64() % 50) as usize;
            let h = 1e-5;
            let (mut up, mut dn) = (c.clone(), c.clone());
            up[p].x += h;
            dn[p].x -= h;
            let fd = (loss_rgb(&up, &gt, Tonemap::Reinhard).0 - loss_rgb(&dn, &gt, Tonemap::Reinhard).0) / (2.0 * h);
            assert!((fd - adj[p].x).abs() <= 1e-6 * adj[p].x.abs().max(1e-12), "{fd} vs {}", adj[p].x);
        }
    }

    fn checker(n: usize) -> Texture2D {
        let data = (0..n * n).flat_map(|i| {
            let v = ((i % n + i / n) % 2) as f32;
            [v, 1.0 - v, 0.5]
        });
        Texture2D::new(n, n, 3, data.collect()).unwrap()
    }

    fn points(rng: &mut Rng, k: usize) -> Vec<[f64; 2]> {
        (0..k).map(|_| rng.next_2d()).collect()
    }

    #[test]
    fn smooth_constant_is_zero_and_checker_positive() {
        let mut rng = Rng::new(3);
        let pts = points(&mut rng, 64);
        let flat = Texture2D::constant(8, 8, &[0.3, 0.3, 0.3]);
        assert!(loss_smooth(&flat, &pts, 2.0, &mut Rng::new(4)).0 < 1e-12);
        assert!(loss_smooth(&checker(8), &pts, 1.0, &mut Rng::new(4)).0 > 0.0);
    }

    #[test]
    fn smooth_adjoint_matches_differences() {
        let mut rng = Rng::new(5);
        let mut tex = checker(8);
        for v in &mut tex.data {
            *v = (*v * 0.5 + 0.25 * rng.next_f64() as f32).clamp(0.0, 1.0);
        }
        let pts = points(&mut rng, 32);
        let (_, grad) = loss_smooth(&tex, &pts, 2.0, &mut Rng::new(6));
        let mut checked = 0;
        for i in 0..tex.data.len() {
            let h = 1e-4f32;
            let mut up = tex.clone();
            up.data[i] += h;
            let mut dn = tex.clone();
            dn.data[i] -= h;
            let lu = loss_smooth(&up, &pts, 2.0, &mut Rng::new(6)).0;
            let ld = loss_smooth(&dn, &pts, 2.0, &mut Rng::new(6)).0;
            let l0 = loss_smooth(&tex, &pts, 2.0, &mut Rng::new(6)).0;
            let step = (up.data[i] - tex.data[i]) as f64;
            // Skip texels where a kink lies inside the stencil.
            if ((lu - l0) - (l0 - ld)).abs() > 1e-9 {
                continue;
            }
            let fd = (lu - ld) / (2.0 * step);
            assert!((fd - grad[i]).abs() <= 1e-3 * grad[i].abs().max(1e-6), "texel {i}: {fd} vs {}", grad[i]);
            checked += 1;
        }
        assert!(checked > tex.data.len() / 2);
    }

    fn covered_image(params: &ParamSet) -> RadianceImage {
        let mut img = RadianceImage::new(4, 4);
        let mut rng = Rng::new(7);
        for p in 0..16 {
            img.material[p] = if p == 5 { -1 } else { 0 };
            img.uv[p] = rng.next_2d();
            img.sample_count[p] = 4;
            img.coverage[p] = 4;
            img.diffuse[p] = params.materials[0].cache.lookup(img.uv[p]).0;
        }
        img
    }

    fn cache_params() -> ParamSet {
        let mut mat = MaterialParams::constant(Vec3::splat(0.5), 0.5, 0.0, 4, 4);
        let mut rng = Rng::new(8);
        for v in &mut mat.cache.tex.data {
            *v = rng.next_f64() as f32;
        }
        ParamSet { materials: vec![mat], env: EnvironmentMap::constant(8, 4, Vec3::ONE) }
    }

    #[test]
    fn diff_exact_cache_is_zero() {
        let params = cache_params();
        let img = covered_image(&params);
        let (l, d, g) = loss_diff(&img, &params, Tonemap::Reinhard);
        assert!(l < 1e-24);
        assert!(d.iter().all(|v| v.length() < 1e-12));
        assert!(g.get(ParamLeaf::Cache(0)).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn diff_cache_above_target_descends() {
        let params = cache_params();
        let mut img = covered_image(&params);
        for d in &mut img.diffuse {
            *d = *d * 0.5;
        }
        let (l, _, g) = loss_diff(&img, &params, Tonemap::Reinhard);
        assert!(l > 0.0);
        let cg = g.get(ParamLeaf::Cache(0));
        // Gradient descent lowers every touched texel.
        assert!(cg.iter().all(|x| *x >= 0.0) && cg.iter().any(|x| *x > 0.0));
    }

    #[test]
    fn diff_adjoints_match_differences() {
        let params = cache_params();
        let mut img = covered_image(&params);
        let mut rng = Rng::new(9);
        for d in &mut img.diffuse {
            *d = *d + vec3(rng.next_f64(), rng.next_f64(), rng.next_f64()) * 0.3;
        }
        let (_, d_diff, g) = loss_diff(&img, &params, Tonemap::Reinhard);
        let h = 1e-6;
        let (mut up, mut dn) = (img.clone(), img.clone());
        up.diffuse[3].z += h;
        dn.diffuse[3].z -= h;
        let fd = (loss_diff(&up, &params, Tonemap::Reinhard).0 - loss_diff(&dn, &params, Tonemap::Reinhard).0) / (2.0 * h);
        assert!((fd - d_diff[3].z).abs() < 1e-6 * fd.abs().max(1e-9));
        let i = 4;
        let hf = 1e-3f32;
        let (mut pu, mut pd) = (params.clone(), params.clone());
        pu.materials[0].cache.tex.data[i] += hf;
        pd.materials[0].cache.tex.data[i] -= hf;
        let step = (pu.materials[0].cache.tex.data[i] - params.materials[0].cache.tex.data[i]) as f64;
        let fd = (loss_diff(&img, &pu, Tonemap::Reinhard).0 - loss_diff(&img, &pd, Tonemap::Reinhard).0) / (2.0 * step);
        let a = g.get(ParamLeaf::Cache(0))[i];
        assert!((fd - a).abs() < 1e-4 * a.abs().max(1e-9), "{fd} vs {a}");
    }

    #[test]
    fn uncovered_pixels_are_excluded() {
        let params = cache_params();
        let mut img = covered_image(&params);
        img.diffuse[5] = Vec3::splat(100.0);
        assert!(loss_diff(&img, &params, Tonemap::Reinhard).0 < 1e-24);
    }
}
