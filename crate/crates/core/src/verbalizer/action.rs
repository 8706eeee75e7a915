//! Keep/enrich decisions per interaction.

use crate::domain::{Catalog, Token, UserHistory, VerbalizedContext};
use crate::error::Result;
use crate::policy::{bernoulli_logprob, check_len, dot, sigmoid, PolicyModel, Trace};
use crate::rng::Xoshiro256;

use super::features::{HistoryView, N_FEATURES};
use super::template::{enrichment_tokens, title_tokens, TEMPLATE_TOKENS_PER_RECORD};

#[derive(Debug, Clone, PartialEq)]
pub struct ActionPolicyParams {
    pub keep_weights: [f64; N_FEATURES],
    pub enrich_weights: [f64; N_FEATURES],
}

impl ActionPolicyParams {
    pub const N_PARAMS: usize = 2 * N_FEATURES;

    pub fn zeros() -> Self {
        ActionPolicyParams {
            keep_weights: [0.0; N_FEATURES],
            enrich_weights: [0.0; N_FEATURES],
        }
    }

    /// Layout: keep weights, then enrich weights.
    pub fn to_flat(&self) -> Vec<f64> {
        self.keep_weights
            .iter()
            .chain(&self.enrich_weights)
            .copied()
            .collect()
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        check_len("action params", Self::N_PARAMS, flat.len())?;
        Ok(ActionPolicyParams {
            keep_weights: flat[..N_FEATURES].try_into().unwrap(),
            enrich_weights: flat[N_FEATURES..].try_into().unwrap(),
        })
    }
}

/// Two Bernoulli decisions per interaction: `k_t` (keep) then `m_t` (enrich).
/// Trajectories are `[k_0, m_0, k_1, m_1, ...]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ActionModel;

fn logits(params: &[f64], f: &[f64; N_FEATURES]) -> (f64, f64) {
    (
        dot(&params[..N_FEATURES], f),
        dot(&params[N_FEATURES..], f),
    )
}

impl PolicyModel for ActionModel {
    type Input = HistoryView;

    fn n_params(&self) -> usize {
        ActionPolicyParams::N_PARAMS
    }

    fn n_decisions(&self, input: &HistoryView) -> usize {
        2 * input.len()
    }

    fn sample(&self, params: &[f64], input: &HistoryView, rng: &mut Xoshiro256) -> Trace {
        let mut choices = Vec::with_capacity(2 * input.len());
        let mut logprobs = Vec::with_capacity(2 * input.len());
        for f in &input.features {
            let (zk, zm) = logits(params, f);
            for z in [zk, zm] {
                let bit = rng.next_f64() < sigmoid(z);
                choices.push(bit as u8);
                logprobs.push(bernoulli_logprob(z, bit));
            }
        }
        Trace { choices, logprobs }
    }

    fn greedy(&self, params: &[f64], input: &HistoryView) -> Vec<u8> {
        input
            .features
            .iter()
            .flat_map(|f| {
                let (zk, zm) = logits(params, f);
                [(zk >= 0.0) as u8, (zm >= 0.0) as u8]
            })
            .collect()
    }

    fn logprobs(&self, params: &[f64], input: &HistoryView, choices: &[u8]) -> Result<Vec<f64>> {
        check_len("action choices", 2 * input.len(), choices.len())?;
        Ok(input
            .features
            .iter()
            .zip(choices.chunks(2))
            .flat_map(|(f, c)| {
                let (zk, zm) = logits(params, f);
                [bernoulli_logprob(zk, c[0] == 1), bernoulli_logprob(zm, c[1] == 1)]
            })
            .collect())
    }

    fn accumulate_grad(
        &self,
        params: &[f64],
        input: &HistoryView,
        choices: &[u8],
        coeffs: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        check_len("action choices", 2 * input.len(), choices.len())?;
        check_len("action coeffs", choices.len(), coeffs.len())?;
        check_len("action grad", self.n_params(), grad.len())?;
        for (t, f) in input.features.iter().enumerate() {
            let (zk, zm) = logits(params, f);
            let dk = coeffs[2 * t] * (choices[2 * t] as f64 - sigmoid(zk));
            let dm = coeffs[2 * t + 1] * (choices[2 * t + 1] as f64 - sigmoid(zm));
            for j in 0..N_FEATURES {
                grad[j] += dk * f[j];
                grad[N_FEATURES + j] += dm * f[j];
            }
        }
        Ok(())
    }
}

pub fn action_sample(
    params: &ActionPolicyParams,
    view: &HistoryView,
    rng: &mut Xoshiro256,
) -> Trace {
    ActionModel.sample(&params.to_flat(), view, rng)
}

pub fn action_logprobs(
    params: &ActionPolicyParams,
    view: &HistoryView,
    choices: &[u8],
) -> Result<Vec<f64>> {
    ActionModel.logprobs(&params.to_flat(), view, choices)
}

/// Dropped records vanish; kept ones become `[TITLE, TITLE, ENG]`, plus
/// `[GENRE, TAG, TAG, TAG]` when enriched.
pub fn render_actions(
    history: &UserHistory,
    choices: &[u8],
    catalog: &Catalog,
) -> Result<VerbalizedContext> {
    check_len("action choices", 2 * history.len(), choices.len())?;
    let mut tokens = Vec::new();
    for (r, c) in history.records.iter().zip(choices.chunks(2)) {
        let meta = catalog.get(r.item)?;
        if c[0] == 1 {
            tokens.extend(title_tokens(r.item));
            tokens.push(Token::Eng(r.eng));
            if c[1] == 1 {
                tokens.extend(enrichment_tokens(meta));
            }
        }
    }
    Ok(VerbalizedContext {
        tokens,
        source_template_len: history.len() * TEMPLATE_TOKENS_PER_RECORD,
    })
}
