use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::adam::{adam_step, AdamState};
use super::config::OptimConfig;
use super::dataset::{Dataset, View};
use super::loss::{loss_diff, loss_rgb, loss_smooth, surface_points};
use crate::assets::io::{save_checkpoint, write_preview_png};
use crate::assets::{GradBuffer, ParamLeaf, ParamSet};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::integrator::{flatten, psnr, render, render_with_tape, RenderConfig};
use crate::sampling::Rng;

/// Loss terms of one step, averaged over its views.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepMetrics {
    pub iter: u32,
    pub l_rgb: f64,
    pub l_d: f64,
    pub l_orm: f64,
    pub l_diff: f64,
    /// PSNR of the rendered training view(s) against ground truth.
    pub psnr: f64,
    pub warmup: bool,
}

impl StepMetrics {
    pub fn total(&self, cfg: &OptimConfig) -> f64 {
        self.l_rgb + cfg.w_d * self.l_d + cfg.w_orm * self.l_orm + cfg.w_diff * self.l_diff
    }
}

#[derive(Clone, Debug, Default)]
pub struct OptimReport {
    pub metrics: Vec<StepMetrics>,
    /// Leaf updates skipped for non-finite gradients.
    pub skipped_leaves: u64,
    /// Camera samples dropped as NaN across all steps.
    pub nan_samples: u64,
}

/// Renders `view` and accumulates the weighted gradient of the full loss
/// into `grads`. In warmup only the cache term is differentiated.
pub fn accumulate_view(
    geom: &Geometry,
    params: &ParamSet,
    view: &View,
    ocfg: &OptimConfig,
    rcfg: &RenderConfig,
    seed: u64,
    warmup: bool,
    grads: &mut GradBuffer,
) -> Result<(StepMetrics, u64)> {
    let mut m = StepMetrics { warmup, ..Default::default() };
    let (img, tape) = if warmup {
        (render(geom, params, &view.camera, rcfg, seed)?, None)
    } else if ocfg.decorrelate {
        let img = render(geom, params, &view.camera, rcfg, seed)?;
        let adjoint_seed = Rng::derive(seed, &[0xADD0]).seed();
        (img, Some(render_with_tape(geom, params, None, &view.camera, rcfg, adjoint_seed)?.1))
    } else {
        let (img, tape) = render_with_tape(geom, params, None, &view.camera, rcfg, seed)?;
        (img, Some(tape))
    };
    if img.radiance.len() != view.image.len() {
        return Err(Error::Data(format!("view {}: image size does not match its camera", view.name)));
    }
    let (l_rgb, d_rad) = loss_rgb(&img.radiance, &view.image, ocfg.tonemap);
    let (l_diff, mut d_diff, mut cache_grads) = loss_diff(&img, params, ocfg.tonemap);
    m.l_rgb = l_rgb;
    m.l_diff = l_diff;
    m.psnr = psnr(&img.radiance, &view.image);
    cache_grads.scale(ocfg.w_diff);
    grads.merge(&cache_grads);

    // Smoothness is averaged over the whole image like L_rgb: each
    // material's mean over its surface points is weighted by its pixel share.
    let mut rng = Rng::derive(seed, &[0x5300]);
    let n_px = img.pixel_count().max(1) as f64;
    for mi in 0..params.materials.len() {
        let share = img.material.iter().filter(|&&id| id == mi as i32).count() as f64 / n_px;
        let pts = surface_points(&img, mi, ocfg.smooth_points as usize, &mut rng);
        let (ld, gd) = loss_smooth(&params.materials[mi].kd, &pts, ocfg.smooth_texels, &mut rng);
        let (lo, go) = loss_smooth(&params.materials[mi].orm, &pts, ocfg.smooth_texels, &mut rng);
        m.l_d += share * ld;
        m.l_orm += share * lo;
        if !warmup {
            for (leaf, g, w) in [(ParamLeaf::Kd(mi), gd, ocfg.w_d), (ParamLeaf::Orm(mi), go, ocfg.w_orm)] {
                grads.get_mut(leaf).iter_mut().zip(g).for_each(|(a, b)| *a += w * share * b);
            }
        }
    }

    if let Some(tape) = tape {
        d_diff.iter_mut().for_each(|d| *d = *d * ocfg.w_diff);
        grads.merge(&tape.backward(params, &d_rad, &d_diff)?);
    }
    Ok((m, img.stats.nan_samples))
}

/// One optimization step over `views`; returns averaged metrics.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    geom: &Geometry,
    params: &mut ParamSet,
    views: &[&View],
    ocfg: &OptimConfig,
    rcfg: &RenderConfig,
    state: &mut AdamState,
    iter: u32,
    warmup: bool,
) -> Result<(StepMetrics, u64)> {
    let mut grads = GradBuffer::zeros_like(params);
    let mut sum = StepMetrics { iter, warmup, ..Default::default() };
    let mut nan = 0;
    for (k, view) in views.iter().enumerate() {
        let seed = Rng::derive(ocfg.seed, &[iter as u64, k as u64]).seed();
        let (m, n) = accumulate_view(geom, params, view, ocfg, rcfg, seed, warmup, &mut grads)?;
        nan += n;
        sum.l_rgb += m.l_rgb;
        sum.l_d += m.l_d;
        sum.l_orm += m.l_orm;
        sum.l_diff += m.l_diff;
        sum.psnr += m.psnr;
    }
    let inv = 1.0 / views.len().max(1) as f64;
    grads.scale(inv);
    for v in [&mut sum.l_rgb, &mut sum.l_d, &mut sum.l_orm, &mut sum.l_diff, &mut sum.psnr] {
        *v *= inv;
    }
    let mask = &ocfg.train;
    adam_step(params, &grads, state, ocfg, |leaf| {
        mask.allows(leaf) && (!warmup || matches!(leaf, ParamLeaf::Cache(_)))
    })?;
    Ok((sum, nan))
}

/// PSNR of each view rendered with `params`.
pub fn evaluate(geom: &Geometry, params: &ParamSet, views: &[View], rcfg: &RenderConfig, seed: u64) -> Result<Vec<f64>> {
    views
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let img = render(geom, params, &v.camera, rcfg, Rng::derive(seed, &[k as u64]).seed())?;
            Ok(psnr(&img.radiance, &v.image))
        })
        .collect()
}

/// Tracks `L_rgb` against its running minimum.
struct DivergenceGuard {
    min: f64,
    run: u32,
}

impl DivergenceGuard {
    fn check(&mut self, l: f64, cfg: &OptimConfig, iter: u32) -> Result<()> {
        if l.is_finite() && l < self.min {
            self.min = l;
        }
        if !l.is_finite() || l > cfg.divergence_factor * self.min {
            self.run += 1;
        } else {
            self.run = 0;
        }
        if self.run >= cfg.divergence_window {
            return Err(Error::Diverged(format!(
                "L_rgb = {l:.6e} at step {iter}, above {}x its minimum {:.6e} for {} consecutive steps",
                cfg.divergence_factor, self.min, self.run
            )));
        }
        Ok(())
    }
}

/// Runs the render → loss → backward → Adam loop over shuffled epochs of
/// the training views. With `out` set, writes `metrics.csv`, periodic
/// checkpoints and previews, and a final checkpoint under `final/`.
pub fn optimize(
    geom: &Geometry,
    params: &mut ParamSet,
    dataset: &Dataset,
    ocfg: &OptimConfig,
    rcfg: &RenderConfig,
    out: Option<&Path>,
) -> Result<OptimReport> {
    ocfg.validate()?;
    rcfg.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::Data("dataset has no training views".into()));
    }
    let mut csv = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let p = dir.join("metrics.csv");
            let mut w = BufWriter::new(File::create(&p).map_err(|e| Error::io(&p, e))?);
            writeln!(w, "iter,l_rgb,l_d,l_orm,l_diff,psnr").map_err(|e| Error::io(&p, e))?;
            Some((w, p))
        }
        None => None,
    };

    let mut report = OptimReport::default();
    let mut state = AdamState::new();
    let mut guard = DivergenceGuard { min: f64::INFINITY, run: 0 };
    let mut shuffle = Rng::derive(ocfg.seed, &[0xE90C]);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;

    for iter in 0..ocfg.iterations {
        let mut views = Vec::with_capacity(ocfg.batch as usize);
        for _ in 0..ocfg.batch {
            if cursor == order.len() {
                order = (0..dataset.train.len()).collect();
                for i in (1..order.len()).rev() {
                    order.swap(i, (shuffle.next_u64() % (i as u64 + 1)) as usize);
                }
                cursor = 0;
            }
            views.push(&dataset.train[order[cursor]]);
            cursor += 1;
        }
        let warm = iter < ocfg.warmup && ocfg.train.cache;
        let (m, nan) = train_step(geom, params, &views, ocfg, rcfg, &mut state, iter, warm)?;
        report.nan_samples += nan;
        report.metrics.push(m);

        if let Some((w, p)) = csv.as_mut() {
            writeln!(w, "{},{:.9e},{:.9e},{:.9e},{:.9e},{:.6}", iter, m.l_rgb, m.l_d, m.l_orm, m.l_diff, m.psnr)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&*p, e))?;
        }
        if let Some(dir) = out {
            let step = iter + 1;
            if ocfg.checkpoint_every > 0 && step % ocfg.checkpoint_every == 0 {
                save_checkpoint(&dir.join(format!("checkpoints/iter_{step:05}")), params)?;
            }
            if ocfg.preview_every > 0 && step % ocfg.preview_every == 0 {
                let v = views[0];
                let img = render(geom, params, &v.camera, rcfg, ocfg.seed)?;
                write_preview_png(&dir.join(format!("preview_{step:05}.png")), img.width, img.height, &flatten(&img.radiance))?;
            }
        }
        if !warm {
            guard.check(m.l_rgb, ocfg, iter).inspect_err(|_| report.skipped_leaves = state.skipped)?;
        }
    }
    report.skipped_leaves = state.skipped;
    if let Some(dir) = out {
        save_checkpoint(&dir.join("final"), params)?;
    }
    Ok(report)
}
