use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::Tonemap;

/// Which parameter classes receive updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainMask {
    pub kd: bool,
    pub orm: bool,
    pub normal: bool,
    pub env: bool,
    pub cache: bool,
}

impl Default for TrainMask {
    fn default() -> Self {
        Self { kd: true, orm: true, normal: true, env: true, cache: true }
    }
}

/// Loss weights, Adam hyperparameters and the loop schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimConfig {
    pub lr: f64,
    /// Weight of the albedo smoothness term.
    pub w_d: f64,
    /// Weight of the occlusion/roughness/metalness smoothness term.
    pub w_orm: f64,
    /// Weight of the cache self-supervision term.
    pub w_diff: f64,
    pub iterations: u32,
    /// Views rendered per step.
    pub batch: u32,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Largest smoothness perturbation, in texels of the smoothed texture.
    pub smooth_texels: f64,
    /// Surface points drawn per smoothness evaluation.
    pub smooth_points: u32,
    /// Leading steps that update only the diffuse cache.
    pub warmup: u32,
    /// Take the loss residual from a separate render with independent
    /// samples, so noise in the residual does not correlate with the
    /// derivative it multiplies.
    pub decorrelate: bool,
    pub tonemap: Tonemap,
    pub train: TrainMask,
    pub seed: u64,
    /// Checkpoint and preview cadence in steps; 0 disables.
    pub checkpoint_every: u32,
    pub preview_every: u32,
    /// Halt when `L_rgb` stays above `divergence_factor` times its minimum
    /// for `divergence_window` consecutive steps.
    pub divergence_factor: f64,
    pub divergence_window: u32,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr: 0.03,
            w_d: 0.1,
            w_orm: 0.05,
            w_diff: 1.0,
            iterations: 500,
            batch: 1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            smooth_texels: 2.0,
            smooth_points: 1024,
            warmup: 50,
            decorrelate: true,
            tonemap: Tonemap::Reinhard,
            train: TrainMask::default(),
            seed: 0,
            checkpoint_every: 0,
            preview_every: 0,
            divergence_factor: 10.0,
            divergence_window: 100,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Data(format!("optimizer config: {m}")));
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if ![self.w_d, self.w_orm, self.w_diff].iter().all(|w| *w >= 0.0 && w.is_finite()) {
            return bad("loss weights must be finite and non-negative");
        }
        if self.batch == 0 {
            return bad("batch must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return bad("Adam needs beta1, beta2 in [0, 1) and eps > 0");
        }
        if !(self.smooth_texels >= 0.0) {
            return bad("smooth_texels must be non-negative");
        }
        if !(self.divergence_factor > 1.0) || self.divergence_window == 0 {
            return bad("divergence guard needs factor > 1 and a positive window");
        }
        Ok(())
    }
}
