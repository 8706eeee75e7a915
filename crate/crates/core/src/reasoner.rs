//! Trainable reasoner: a softmax over linear candidate scores, trained with
//! the group-relative objective against +-1 correctness rewards while the
//! verbalizer stays frozen.

use serde::{Deserialize, Serialize};

use crate::domain::{Catalog, EpisodeInstance, Token, UserHistory, VerbalizedContext, N_CANDIDATES};
use crate::error::{Error, Result};
use crate::grpo::{run_grpo, GrpoConfig, RolloutOutcome, TrainingLog};
use crate::par::Exec;
use crate::policy::{check_len, PolicyModel, Trace};
use crate::rng::{purpose, Xoshiro256};
use crate::verbalizer::Verbalizer;

pub const N_REASONER_FEATURES: usize = 6;

pub type CandidateFeatures = [f64; N_REASONER_FEATURES];

/// Feature rows for the ten candidates of one episode.
pub type CandidateMatrix = [CandidateFeatures; N_CANDIDATES];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReasonerConfig {
    pub init_scale: f64,
}

impl Default for ReasonerConfig {
    fn default() -> Self {
        ReasonerConfig { init_scale: 0.0 }
    }
}

impl ReasonerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.init_scale.is_finite() && self.init_scale >= 0.0 {
            Ok(())
        } else {
            Err(Error::Config("reasoner.init_scale must be finite and >= 0".into()))
        }
    }
}

/// `[1, genre, tag, title, pref, watched]`, each match count divided by
/// `1 + |context|`.
pub fn candidate_features(
    context: &VerbalizedContext,
    candidate: u32,
    history: &UserHistory,
    catalog: &Catalog,
) -> Result<CandidateFeatures> {
    let meta = catalog.get(candidate)?;
    let (mut genre, mut tag, mut title, mut pref) = (0.0, 0.0, 0.0, 0.0);
    for tok in &context.tokens {
        match tok {
            Token::Genre(g) if *g == meta.genre => genre += 1.0,
            Token::Tag(t) if meta.has_tag(*t) => tag += 1.0,
            Token::Title { item, .. } if *item == candidate => title += 1.0,
            Token::Pref(g) if *g == meta.genre => pref += 1.0,
            _ => {}
        }
    }
    let scale = 1.0 / (1.0 + context.len() as f64);
    let watched = if history.contains_item(candidate) { 1.0 } else { 0.0 };
    Ok([1.0, genre * scale, tag * scale, title * scale, pref * scale, watched])
}

pub fn candidate_matrix(
    context: &VerbalizedContext,
    episode: &EpisodeInstance,
    catalog: &Catalog,
) -> Result<CandidateMatrix> {
    check_len("candidates", N_CANDIDATES, episode.candidates.len())?;
    let mut m = [[0.0; N_REASONER_FEATURES]; N_CANDIDATES];
    for (row, c) in m.iter_mut().zip(&episode.candidates) {
        *row = candidate_features(context, *c, &episode.history, catalog)?;
    }
    Ok(m)
}

/// Features equal across all candidates (always the bias) shift every score
/// alike, so they are left out of the scores; the softmax is unchanged and
/// their weights get an exactly zero gradient.
fn varying_features(m: &CandidateMatrix) -> [bool; N_REASONER_FEATURES] {
    std::array::from_fn(|k| m.iter().any(|row| row[k] != m[0][k]))
}

fn log_softmax_scores(params: &[f64], m: &CandidateMatrix) -> [f64; N_CANDIDATES] {
    let live = varying_features(m);
    let mut z = [0.0; N_CANDIDATES];
    for (zi, row) in z.iter_mut().zip(m) {
        *zi = (0..N_REASONER_FEATURES)
            .filter(|k| live[*k])
            .map(|k| params[k] * row[k])
            .sum();
    }
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    for v in z.iter_mut() {
        *v -= lse;
    }
    z
}

pub fn probs_from_features(params: &[f64], m: &CandidateMatrix) -> [f64; N_CANDIDATES] {
    log_softmax_scores(params, m).map(f64::exp)
}

pub fn reasoner_probs(
    params: &[f64],
    context: &VerbalizedContext,
    episode: &EpisodeInstance,
    catalog: &Catalog,
) -> Result<[f64; N_CANDIDATES]> {
    check_len("reasoner params", N_REASONER_FEATURES, params.len())?;
    Ok(probs_from_features(params, &candidate_matrix(context, episode, catalog)?))
}

/// Highest-probability candidate, ties to the lowest index.
pub fn reasoner_predict(params: &[f64], m: &CandidateMatrix) -> usize {
    let lp = log_softmax_scores(params, m);
    crate::oracle::oracle_predict(&lp)
}

pub fn stage2_reward(prediction: usize, target: usize) -> f64 {
    if prediction == target {
        1.0
    } else {
        -1.0
    }
}

/// One prediction per trajectory, drawn from the candidate softmax.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReasonerModel;

impl PolicyModel for ReasonerModel {
    type Input = CandidateMatrix;

    fn n_params(&self) -> usize {
        N_REASONER_FEATURES
    }

    fn n_decisions(&self, _input: &CandidateMatrix) -> usize {
        1
    }

    fn sample(&self, params: &[f64], input: &CandidateMatrix, rng: &mut Xoshiro256) -> Trace {
        let lp = log_softmax_scores(params, input);
        let c = rng.categorical(&lp.map(f64::exp));
        Trace {
            choices: vec![c as u8],
            logprobs: vec![lp[c]],
        }
    }

    fn greedy(&self, params: &[f64], input: &CandidateMatrix) -> Vec<u8> {
        vec![reasoner_predict(params, input) as u8]
    }

    fn logprobs(&self, params: &[f64], input: &CandidateMatrix, choices: &[u8]) -> Result<Vec<f64>> {
        check_len("reasoner params", N_REASONER_FEATURES, params.len())?;
        check_len("reasoner choices", 1, choices.len())?;
        let c = choices[0] as usize;
        if c >= N_CANDIDATES {
            return Err(Error::Shape(format!("prediction {c} out of range")));
        }
        Ok(vec![log_softmax_scores(params, input)[c]])
    }

    fn accumulate_grad(
        &self,
        params: &[f64],
        input: &CandidateMatrix,
        choices: &[u8],
        coeffs: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        check_len("reasoner choices", 1, choices.len())?;
        check_len("coefficients", 1, coeffs.len())?;
        check_len("gradient", N_REASONER_FEATURES, grad.len())?;
        let c = choices[0] as usize;
        let p = probs_from_features(params, input);
        let live = varying_features(input);
        for (j, row) in input.iter().enumerate() {
            let w = coeffs[0] * (if j == c { 1.0 } else { 0.0 } - p[j]);
            for k in (0..N_REASONER_FEATURES).filter(|k| live[*k]) {
                grad[k] += w * row[k];
            }
        }
        Ok(())
    }
}

/// Contexts from the frozen verbalizer, greedily decoded.
pub fn frozen_contexts(
    episodes: &[EpisodeInstance],
    verbalizer: &Verbalizer,
    catalog: &Catalog,
    exec: Exec,
) -> Result<Vec<(VerbalizedContext, CandidateMatrix)>> {
    exec.try_map_range(episodes.len(), |i| {
        let ep = &episodes[i];
        let ctx = verbalizer.verbalize(&ep.history, catalog)?;
        let m = candidate_matrix(&ctx, ep, catalog)?;
        Ok((ctx, m))
    })
}

/// Stage-2 training. The verbalizer produces one fixed context per episode;
/// the reasoner samples G predictions and is rewarded +-1.
pub fn train_stage2(
    train: &[EpisodeInstance],
    catalog: &Catalog,
    verbalizer: &Verbalizer,
    initial: Vec<f64>,
    cfg: &GrpoConfig,
    seed: u64,
    exec: Exec,
) -> Result<(Vec<f64>, TrainingLog)> {
    let prepared = frozen_contexts(train, verbalizer, catalog, exec)?;
    let ratios: Vec<f64> = prepared.iter().map(|(c, _)| c.compression_ratio()).collect();
    let inputs: Vec<CandidateMatrix> = prepared.into_iter().map(|(_, m)| m).collect();
    run_grpo(
        &ReasonerModel,
        &inputs,
        |idx, choices| {
            let hit = choices[0] as usize == train[idx].target_index;
            Ok(RolloutOutcome {
                reward: stage2_reward(choices[0] as usize, train[idx].target_index),
                r_acc: if hit { 1.0 } else { 0.0 },
                r_len: 0.0,
                ratio: ratios[idx],
            })
        },
        initial,
        cfg,
        seed,
        purpose::STAGE2_ROLLOUT,
        exec,
    )
}

/// Initial reasoner weights for `seed`.
pub fn init_reasoner(cfg: &ReasonerConfig, seed: u64) -> Vec<f64> {
    let mut rng = Xoshiro256::stream(seed, purpose::INIT_PARAMS, 100);
    crate::verbalizer::init_params(N_REASONER_FEATURES, cfg.init_scale, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Genre, ItemMeta, Tag};

    fn catalog() -> Catalog {
        let mk = |id: u32, g: Genre| ItemMeta {
            item_id: id,
            title_tokens: [format!("ab{}", "x".repeat(id as usize)), "zed".to_string()],
            genre: g,
            tags: [Tag::new(0).unwrap(), Tag::new(1).unwrap(), Tag::new(2).unwrap()],
            year: 2000,
        };
        Catalog::new(vec![mk(1, Genre::Scifi), mk(2, Genre::Drama)]).unwrap()
    }

    fn history() -> UserHistory {
        UserHistory {
            user_id: 0,
            records: vec![],
        }
    }

    #[test]
    fn empty_context_gives_bias_only() {
        let ctx = VerbalizedContext {
            tokens: vec![],
            source_template_len: 8,
        };
        let f = candidate_features(&ctx, 1, &history(), &catalog()).unwrap();
        assert_eq!(f, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn pref_match_is_scaled() {
        let ctx = VerbalizedContext {
            tokens: vec![Token::Pref(Genre::Scifi)],
            source_template_len: 8,
        };
        let f = candidate_features(&ctx, 1, &history(), &catalog()).unwrap();
        assert_eq!(f[4], 0.5);
        let g = candidate_features(&ctx, 2, &history(), &catalog()).unwrap();
        assert_eq!(g[4], 0.0);
    }

    #[test]
    fn unknown_candidate_is_an_error() {
        let ctx = VerbalizedContext {
            tokens: vec![],
            source_template_len: 8,
        };
        assert!(candidate_features(&ctx, 77, &history(), &catalog()).is_err());
    }

    #[test]
    fn zero_params_are_uniform() {
        let m = [[1.0, 0.3, 0.0, 0.1, 0.0, 1.0]; N_CANDIDATES];
        for p in probs_from_features(&[0.0; 6], &m) {
            assert!((p - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn watched_penalty_saturates() {
        let mut m = [[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]; N_CANDIDATES];
        m[3][5] = 1.0;
        m[7][5] = 1.0;
        let p = probs_from_features(&[0.0, 0.0, 0.0, 0.0, 0.0, -20.0], &m);
        assert!(p[3] < 1e-8 && p[7] < 1e-8);
        assert!((p[0] - 0.125).abs() < 1e-6);
    }

    #[test]
    fn stage2_reward_signs() {
        assert_eq!(stage2_reward(3, 3), 1.0);
        assert_eq!(stage2_reward(2, 3), -1.0);
    }
}
