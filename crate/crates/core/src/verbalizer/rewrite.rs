//! Grammar-constrained rewrite: one of DROP / KEEP / KEEP_ENRICH / MERGE_PREV
//! per interaction, followed by one preference-summary decision per genre.
//!
//! Trajectory layout is `T` segment choices then `N_GENRES` PREF bits. The
//! PREF features are computed from the segment choices already made, so the
//! PREF decisions are conditioned on them.

use crate::domain::{Catalog, Genre, Token, UserHistory, VerbalizedContext, N_GENRES};
use crate::error::{Error, Result};
use crate::policy::{
    bernoulli_logprob, check_len, dot, masked_log_softmax, sigmoid, PolicyModel, Trace,
};
use crate::rng::Xoshiro256;

use super::features::{HistoryView, N_FEATURES};
use super::template::{enrichment_tokens, title_tokens, TEMPLATE_TOKENS_PER_RECORD};

pub const DROP: u8 = 0;
pub const KEEP: u8 = 1;
pub const KEEP_ENRICH: u8 = 2;
pub const MERGE_PREV: u8 = 3;
pub const N_SEGMENT_CHOICES: usize = 4;
pub const N_PREF_FEATURES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct RewritePolicyParams {
    /// Row `c` scores segment choice `c`.
    pub segment_weights: [[f64; N_FEATURES]; N_SEGMENT_CHOICES],
    /// Over `[bias, genre_count_fraction, is_top_genre]`.
    pub pref_weights: [f64; N_PREF_FEATURES],
}

impl RewritePolicyParams {
    pub const N_SEGMENT: usize = N_SEGMENT_CHOICES * N_FEATURES;
    pub const N_PARAMS: usize = Self::N_SEGMENT + N_PREF_FEATURES;

    pub fn zeros() -> Self {
        RewritePolicyParams {
            segment_weights: [[0.0; N_FEATURES]; N_SEGMENT_CHOICES],
            pref_weights: [0.0; N_PREF_FEATURES],
        }
    }

    /// Layout: segment weights row-major, then PREF weights.
    pub fn to_flat(&self) -> Vec<f64> {
        self.segment_weights
            .iter()
            .flatten()
            .chain(&self.pref_weights)
            .copied()
            .collect()
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        check_len("rewrite params", Self::N_PARAMS, flat.len())?;
        let mut p = Self::zeros();
        for (c, row) in p.segment_weights.iter_mut().enumerate() {
            row.copy_from_slice(&flat[c * N_FEATURES..(c + 1) * N_FEATURES]);
        }
        p.pref_weights.copy_from_slice(&flat[Self::N_SEGMENT..]);
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RewriteModel;

fn segment_logprobs(params: &[f64], view: &HistoryView, t: usize) -> [f64; N_SEGMENT_CHOICES] {
    let f = &view.features[t];
    let mut logits = [0.0; N_SEGMENT_CHOICES];
    for (c, l) in logits.iter_mut().enumerate() {
        *l = dot(&params[c * N_FEATURES..(c + 1) * N_FEATURES], f);
    }
    let allowed = [true, true, true, view.merge_allowed[t]];
    let mut out = [0.0; N_SEGMENT_CHOICES];
    masked_log_softmax(&logits, &allowed, &mut out);
    out
}

/// PREF features per genre from the segment choices: fraction of non-dropped
/// records in the genre, and whether the genre has the (first) highest count.
pub fn pref_features(view: &HistoryView, segment_choices: &[u8]) -> [[f64; N_PREF_FEATURES]; N_GENRES] {
    let mut counts = [0usize; N_GENRES];
    for (g, c) in view.genres.iter().zip(segment_choices) {
        if *c != DROP {
            counts[g.index()] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    let top = (total > 0).then(|| {
        let max = *counts.iter().max().unwrap();
        counts.iter().position(|c| *c == max).unwrap()
    });
    let mut out = [[0.0; N_PREF_FEATURES]; N_GENRES];
    for g in 0..N_GENRES {
        out[g] = [
            1.0,
            counts[g] as f64 / total.max(1) as f64,
            (top == Some(g)) as u8 as f64,
        ];
    }
    out
}

fn pref_params(params: &[f64]) -> &[f64] {
    &params[RewritePolicyParams::N_SEGMENT..]
}

impl PolicyModel for RewriteModel {
    type Input = HistoryView;

    fn n_params(&self) -> usize {
        RewritePolicyParams::N_PARAMS
    }

    fn n_decisions(&self, input: &HistoryView) -> usize {
        input.len() + N_GENRES
    }

    fn sample(&self, params: &[f64], input: &HistoryView, rng: &mut Xoshiro256) -> Trace {
        let n = input.len();
        let mut choices = Vec::with_capacity(n + N_GENRES);
        let mut logprobs = Vec::with_capacity(n + N_GENRES);
        for t in 0..n {
            let lp = segment_logprobs(params, input, t);
            let probs = lp.map(f64::exp);
            let c = rng.categorical(&probs);
            choices.push(c as u8);
            logprobs.push(lp[c]);
        }
        let pf = pref_features(input, &choices);
        for f in &pf {
            let z = dot(pref_params(params), f);
            let bit = rng.next_f64() < sigmoid(z);
            choices.push(bit as u8);
            logprobs.push(bernoulli_logprob(z, bit));
        }
        Trace { choices, logprobs }
    }

    fn greedy(&self, params: &[f64], input: &HistoryView) -> Vec<u8> {
        let mut choices: Vec<u8> = (0..input.len())
            .map(|t| {
                let lp = segment_logprobs(params, input, t);
                let mut best = 0;
                for c in 1..N_SEGMENT_CHOICES {
                    if lp[c] > lp[best] {
                        best = c;
                    }
                }
                best as u8
            })
            .collect();
        let pf = pref_features(input, &choices);
        choices.extend(pf.iter().map(|f| (dot(pref_params(params), f) >= 0.0) as u8));
        choices
    }

    fn logprobs(&self, params: &[f64], input: &HistoryView, choices: &[u8]) -> Result<Vec<f64>> {
        let n = input.len();
        check_len("rewrite choices", n + N_GENRES, choices.len())?;
        let mut out = Vec::with_capacity(choices.len());
        for t in 0..n {
            out.push(segment_logprobs(params, input, t)[choices[t] as usize]);
        }
        let pf = pref_features(input, &choices[..n]);
        for (f, c) in pf.iter().zip(&choices[n..]) {
            out.push(bernoulli_logprob(dot(pref_params(params), f), *c == 1));
        }
        Ok(out)
    }

    fn accumulate_grad(
        &self,
        params: &[f64],
        input: &HistoryView,
        choices: &[u8],
        coeffs: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        let n = input.len();
        check_len("rewrite choices", n + N_GENRES, choices.len())?;
        check_len("rewrite coeffs", choices.len(), coeffs.len())?;
        check_len("rewrite grad", self.n_params(), grad.len())?;
        for t in 0..n {
            let lp = segment_logprobs(params, input, t);
            let f = &input.features[t];
            let chosen = choices[t] as usize;
            for (c, l) in lp.iter().enumerate() {
                if !l.is_finite() {
                    continue;
                }
                let d = coeffs[t] * ((c == chosen) as u8 as f64 - l.exp());
                for j in 0..N_FEATURES {
                    grad[c * N_FEATURES + j] += d * f[j];
                }
            }
        }
        let pf = pref_features(input, &choices[..n]);
        for (g, f) in pf.iter().enumerate() {
            let z = dot(pref_params(params), f);
            let d = coeffs[n + g] * (choices[n + g] as f64 - sigmoid(z));
            for j in 0..N_PREF_FEATURES {
                grad[RewritePolicyParams::N_SEGMENT + j] += d * f[j];
            }
        }
        Ok(())
    }
}

pub fn rewrite_sample(
    params: &RewritePolicyParams,
    view: &HistoryView,
    rng: &mut Xoshiro256,
) -> Trace {
    RewriteModel.sample(&params.to_flat(), view, rng)
}

pub fn rewrite_logprobs(
    params: &RewritePolicyParams,
    view: &HistoryView,
    choices: &[u8],
) -> Result<Vec<f64>> {
    RewriteModel.logprobs(&params.to_flat(), view, choices)
}

struct Segment {
    item: u32,
    record: usize,
    count: u32,
    enrich: bool,
}

/// Executes a rewrite trajectory.
///
/// MERGE_PREV folds a record into the segment of its same-item run, which
/// then renders as `[TITLE, TITLE, ENG, COUNT:n]` (+ enrichment if that
/// segment was opened with KEEP_ENRICH). If every earlier record of the run
/// was dropped, the merge opens a plain segment.
pub fn render_rewrite(
    history: &UserHistory,
    choices: &[u8],
    catalog: &Catalog,
) -> Result<VerbalizedContext> {
    let n = history.len();
    check_len("rewrite choices", n + N_GENRES, choices.len())?;
    let records = &history.records;
    let mut segments: Vec<Segment> = Vec::new();
    let mut run_segment: Option<usize> = None;
    for t in 0..n {
        catalog.get(records[t].item)?;
        let same_as_prev = t > 0 && records[t - 1].item == records[t].item;
        if !same_as_prev {
            run_segment = None;
        }
        match choices[t] {
            DROP => {}
            KEEP | KEEP_ENRICH => {
                segments.push(Segment {
                    item: records[t].item,
                    record: t,
                    count: 1,
                    enrich: choices[t] == KEEP_ENRICH,
                });
                run_segment = Some(segments.len() - 1);
            }
            MERGE_PREV => {
                if !same_as_prev {
                    return Err(Error::Internal(format!(
                        "MERGE_PREV at record {t} without a same-item predecessor"
                    )));
                }
                match run_segment {
                    Some(s) => segments[s].count += 1,
                    None => {
                        segments.push(Segment {
                            item: records[t].item,
                            record: t,
                            count: 1,
                            enrich: false,
                        });
                        run_segment = Some(segments.len() - 1);
                    }
                }
            }
            other => {
                return Err(Error::Internal(format!(
                    "segment choice {other} at record {t}"
                )))
            }
        }
    }

    let mut tokens = Vec::new();
    for s in &segments {
        tokens.extend(title_tokens(s.item));
        tokens.push(Token::Eng(records[s.record].eng));
        if s.count > 1 {
            tokens.push(Token::Count(s.count));
        }
        if s.enrich {
            tokens.extend(enrichment_tokens(catalog.get(s.item)?));
        }
    }
    for (g, bit) in choices[n..].iter().enumerate() {
        if *bit == 1 {
            tokens.push(Token::Pref(Genre::from_index(g)));
        }
    }
    Ok(VerbalizedContext {
        tokens,
        source_template_len: n * TEMPLATE_TOKENS_PER_RECORD,
    })
}
