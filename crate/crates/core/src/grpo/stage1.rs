use crate::domain::{Catalog, EpisodeInstance};
use crate::error::Result;
use crate::oracle::{stage1_reward, OracleWeights, RewardConfig};
use crate::par::Exec;
use crate::rng::purpose;
use crate::verbalizer::{render_choices, ActionModel, HistoryView, PolicyKind, RewriteModel};

use super::{run_grpo, GrpoConfig, RolloutOutcome, TrainingLog};

/// Inputs to Stage-1 verbalizer training.
#[derive(Debug, Clone, Copy)]
pub struct Stage1Setup<'a> {
    pub catalog: &'a Catalog,
    pub grpo: &'a GrpoConfig,
    pub reward: &'a RewardConfig,
    pub oracle: &'a OracleWeights,
}

/// Trains a verbalizer policy against the frozen oracle reasoner.
pub fn train_stage1(
    train: &[EpisodeInstance],
    kind: PolicyKind,
    setup: Stage1Setup<'_>,
    initial: Vec<f64>,
    seed: u64,
    exec: Exec,
) -> Result<(Vec<f64>, TrainingLog)> {
    setup.reward.validate()?;
    setup.oracle.validate()?;
    let views = exec.try_map_range(train.len(), |i| HistoryView::new(&train[i].history, setup.catalog))?;
    let score = |idx: usize, choices: &[u8]| -> Result<RolloutOutcome> {
        let ep = &train[idx];
        let ctx = render_choices(kind, &ep.history, choices, setup.catalog)?;
        let r = stage1_reward(&ctx, ep, setup.catalog, setup.reward, setup.oracle)?;
        Ok(RolloutOutcome {
            reward: r.r_total,
            r_acc: r.r_acc,
            r_len: r.r_len,
            ratio: r.compression_ratio,
        })
    };
    let purpose = purpose::STAGE1_ROLLOUT;
    match kind {
        PolicyKind::Action => run_grpo(&ActionModel, &views, score, initial, setup.grpo, seed, purpose, exec),
        PolicyKind::Rewrite => run_grpo(&RewriteModel, &views, score, initial, setup.grpo, seed, purpose, exec),
    }
}
