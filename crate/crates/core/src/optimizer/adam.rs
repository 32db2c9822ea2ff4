use std::collections::HashMap;

use super::config::{OptimConfig, TrainMask};
use crate::assets::{GradBuffer, ParamLeaf, ParamSet};
use crate::error::{Error, Result};

/// First and second moment estimates per leaf.
#[derive(Clone, Debug, Default)]
pub struct AdamState {
    moments: HashMap<ParamLeaf, (Vec<f64>, Vec<f64>, u64)>,
    /// Leaf updates skipped because their gradient was not finite.
    pub skipped: u64,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps(&self, leaf: ParamLeaf) -> u64 {
        self.moments.get(&leaf).map_or(0, |m| m.2)
    }
}

impl TrainMask {
    pub fn allows(&self, leaf: ParamLeaf) -> bool {
        match leaf {
            ParamLeaf::Kd(_) => self.kd,
            ParamLeaf::Orm(_) => self.orm,
            ParamLeaf::Normal(_) => self.normal,
            ParamLeaf::Cache(_) => self.cache,
            ParamLeaf::Env => self.env,
        }
    }
}

/// One Adam update of every leaf accepted by `active`, then projection
/// onto the valid parameter ranges.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &GradBuffer,
    state: &mut AdamState,
    cfg: &OptimConfig,
    active: impl Fn(ParamLeaf) -> bool,
) -> Result<()> {
    if !grads.matches(params) {
        return Err(Error::Data("gradient shapes do not match the parameter set".into()));
    }
    for leaf in params.leaves() {
        if !active(leaf) {
            continue;
        }
        let g = grads.get(leaf);
        if !g.iter().all(|x| x.is_finite()) {
            state.skipped += 1;
            continue;
        }
        let n = g.len();
        let (m, v, t) = state.moments.entry(leaf).or_insert_with(|| (vec![0.0; n], vec![0.0; n], 0));
        *t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(*t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(*t as i32);
        let data = params.data_mut(leaf);
        for i in 0..n {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let step = cfg.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + cfg.eps);
            data[i] = (data[i] as f64 - step) as f32;
        }
    }
    params.project();
    Ok(())
}
