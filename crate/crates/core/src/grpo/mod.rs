//! Group-relative policy optimization shared by both training stages.

mod adam;
mod fd;
mod objective;
mod stage1;
mod train;

pub use adam::{adam_step, AdamState};
pub use fd::finite_diff_check;
pub use objective::{grpo_evaluate, grpo_gradient, grpo_objective, GroupMember, ObjectiveEval, RolloutGroup};
pub use stage1::{train_stage1, Stage1Setup};
pub use train::{run_grpo, LogRow, RolloutOutcome, TrainingLog, LOG_HEADER};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoConfig {
    /// Rollouts per episode.
    #[serde(rename = "G", alias = "group_size")]
    pub group_size: usize,
    /// Added to the group standard deviation when normalizing advantages.
    pub eps_adv: f64,
    pub eps_clip: f64,
    pub beta_kl: f64,
    pub inner_epochs: usize,
    pub lr: f64,
    pub iterations: usize,
    pub batch_episodes: usize,
    pub ref_refresh_every: usize,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig {
            group_size: 8,
            eps_adv: 1e-4,
            eps_clip: 0.2,
            beta_kl: 0.02,
            inner_epochs: 2,
            lr: 0.05,
            iterations: 1000,
            batch_episodes: 16,
            ref_refresh_every: 100,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if self.group_size < 2 {
            v.push("group_size must be >= 2".to_string());
        }
        if !(self.eps_clip > 0.0 && self.eps_clip < 1.0) {
            v.push("eps_clip must be in (0, 1)".into());
        }
        if self.inner_epochs < 1 {
            v.push("inner_epochs must be >= 1".into());
        }
        if !(self.eps_adv >= 0.0 && self.beta_kl >= 0.0 && self.lr > 0.0) {
            v.push("eps_adv and beta_kl must be >= 0, lr > 0".into());
        }
        if self.batch_episodes < 1 {
            v.push("batch_episodes must be >= 1".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("grpo: {}", v.join("; "))))
        }
    }
}

/// `(r_i - mean) / (popstd + eps_adv)`.
///
/// Deviations are taken relative to the first reward before centering, so a
/// shift whose differences are exactly representable leaves the result
/// bit-identical.
pub fn group_advantages(rewards: &[f64], eps_adv: f64) -> Vec<f64> {
    let n = rewards.len() as f64;
    if rewards.iter().all(|r| *r == rewards[0]) {
        return vec![0.0; rewards.len()];
    }
    let offsets: Vec<f64> = rewards.iter().map(|r| r - rewards[0]).collect();
    let mean = offsets.iter().sum::<f64>() / n;
    let dev: Vec<f64> = offsets.iter().map(|d| d - mean).collect();
    let var = dev.iter().map(|d| d * d).sum::<f64>() / n;
    let denom = var.sqrt() + eps_adv;
    dev.into_iter().map(|d| d / denom).collect()
}

/// `min(ratio * adv, clamp(ratio, 1 - eps, 1 + eps) * adv)`
pub fn clipped_term(ratio: f64, advantage: f64, eps_clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps_clip, 1.0 + eps_clip);
    (ratio * advantage).min(clipped * advantage)
}

/// k3 estimator `u - ln u - 1` with `u = pi_ref / pi_current`.
pub fn kl_k3(logp_current: f64, logp_reference: f64) -> f64 {
    let d = logp_reference - logp_current;
    d.exp_m1() - d
}
