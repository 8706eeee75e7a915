//! Verbalization strategies: fixed template, rule-based zero-shot rewrite,
//! and the two learned policies (keep/enrich actions, grammar rewrite).

mod action;
mod features;
mod rewrite;
mod template;

pub use action::{action_logprobs, action_sample, render_actions, ActionModel, ActionPolicyParams};
pub use features::{interaction_features, FeatureVector, HistoryView, N_FEATURES, REPEAT_CAP};
pub use rewrite::{
    pref_features, render_rewrite, rewrite_logprobs, rewrite_sample, RewriteModel,
    RewritePolicyParams, DROP, KEEP, KEEP_ENRICH, MERGE_PREV, N_PREF_FEATURES,
    N_SEGMENT_CHOICES,
};
pub use template::{
    date_parts, epoch_day_of, heuristic_verbalize, render_template, HeuristicRules,
    TEMPLATE_TOKENS_PER_RECORD,
};

use serde::{Deserialize, Serialize};

use crate::domain::{Catalog, UserHistory, VerbalizedContext};
use crate::error::{Error, Result};
use crate::policy::PolicyModel;
use crate::rng::Xoshiro256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Action,
    Rewrite,
}

impl PolicyKind {
    pub fn n_params(self) -> usize {
        match self {
            PolicyKind::Action => ActionPolicyParams::N_PARAMS,
            PolicyKind::Rewrite => RewritePolicyParams::N_PARAMS,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Action => "action",
            PolicyKind::Rewrite => "rewrite",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "action" => Ok(PolicyKind::Action),
            "rewrite" => Ok(PolicyKind::Rewrite),
            other => Err(format!("unknown policy `{other}` (expected action|rewrite)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerbalizerConfig {
    /// Standard deviation of the Gaussian initialization of learned policies.
    pub init_scale: f64,
    pub heuristic: HeuristicRules,
}

impl Default for VerbalizerConfig {
    fn default() -> Self {
        VerbalizerConfig {
            init_scale: 0.1,
            heuristic: HeuristicRules::default(),
        }
    }
}

impl VerbalizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::Config("init_scale must be finite and >= 0".into()));
        }
        if !self.heuristic.min_duration.is_finite() {
            return Err(Error::Config("heuristic.min_duration must be finite".into()));
        }
        Ok(())
    }
}

/// Gaussian initialization drawn from `rng`.
pub fn init_params(n: usize, scale: f64, rng: &mut Xoshiro256) -> Vec<f64> {
    (0..n).map(|_| scale * rng.standard_normal()).collect()
}

/// Any verbalization strategy, with learned policies decoded greedily.
#[derive(Debug, Clone, PartialEq)]
pub enum Verbalizer {
    Template,
    Heuristic(HeuristicRules),
    Action(ActionPolicyParams),
    Rewrite(RewritePolicyParams),
}

impl Verbalizer {
    pub fn learned(kind: PolicyKind, flat: &[f64]) -> Result<Verbalizer> {
        Ok(match kind {
            PolicyKind::Action => Verbalizer::Action(ActionPolicyParams::from_flat(flat)?),
            PolicyKind::Rewrite => Verbalizer::Rewrite(RewritePolicyParams::from_flat(flat)?),
        })
    }

    pub fn verbalize(&self, history: &UserHistory, catalog: &Catalog) -> Result<VerbalizedContext> {
        match self {
            Verbalizer::Template => render_template(history, catalog),
            Verbalizer::Heuristic(rules) => heuristic_verbalize(history, catalog, rules),
            Verbalizer::Action(p) => {
                let view = HistoryView::new(history, catalog)?;
                render_actions(history, &ActionModel.greedy(&p.to_flat(), &view), catalog)
            }
            Verbalizer::Rewrite(p) => {
                let view = HistoryView::new(history, catalog)?;
                render_rewrite(history, &RewriteModel.greedy(&p.to_flat(), &view), catalog)
            }
        }
    }
}

/// Renders a sampled trajectory of a learned policy.
pub fn render_choices(
    kind: PolicyKind,
    history: &UserHistory,
    choices: &[u8],
    catalog: &Catalog,
) -> Result<VerbalizedContext> {
    match kind {
        PolicyKind::Action => render_actions(history, choices, catalog),
        PolicyKind::Rewrite => render_rewrite(history, choices, catalog),
    }
}
