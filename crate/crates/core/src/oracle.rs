//! Fixed reward-providing reasoner: a weighted bag-of-tokens matcher, plus
//! every Stage-1 reward component.

use serde::{Deserialize, Serialize};

use crate::domain::{Catalog, EpisodeInstance, ItemMeta, Token, VerbalizedContext};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleWeights {
    pub w_title: f64,
    pub w_genre: f64,
    pub w_tag: f64,
    pub w_pref: f64,
}

impl Default for OracleWeights {
    fn default() -> Self {
        OracleWeights {
            w_title: 1.0,
            w_genre: 1.0,
            w_tag: 0.5,
            w_pref: 3.0,
        }
    }
}

impl OracleWeights {
    pub fn validate(&self) -> Result<()> {
        let ws = [self.w_title, self.w_genre, self.w_tag, self.w_pref];
        if ws.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config("oracle weights must be finite and nonnegative".into()))
        }
    }
}

/// Trapezoid knots: zero below `lo_zero`, one on `[lo_one, hi_one]`,
/// zero above `hi_zero`, linear in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LengthShape {
    pub lo_zero: f64,
    pub lo_one: f64,
    pub hi_one: f64,
    pub hi_zero: f64,
}

impl Default for LengthShape {
    fn default() -> Self {
        LengthShape {
            lo_zero: 0.05,
            lo_one: 0.3,
            hi_one: 0.7,
            hi_zero: 1.2,
        }
    }
}

impl LengthShape {
    pub fn validate(&self) -> Result<()> {
        if self.lo_zero < self.lo_one && self.lo_one < self.hi_one && self.hi_one < self.hi_zero {
            Ok(())
        } else {
            Err(Error::Config(
                "length shape needs lo_zero < lo_one < hi_one < hi_zero".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AccuracySignal {
    /// 1 when the oracle's top candidate is the target, else 0.
    #[default]
    Accuracy,
    /// Linear in the target's oracle rank.
    Ranking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub alpha: f64,
    pub length_shape: LengthShape,
    pub signal: AccuracySignal,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            alpha: 0.9,
            length_shape: LengthShape::default(),
            signal: AccuracySignal::Accuracy,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("reward.alpha {} not in [0, 1]", self.alpha)));
        }
        self.length_shape.validate()
    }
}

pub fn token_weight(token: &Token, candidate: &ItemMeta, weights: &OracleWeights) -> f64 {
    match token {
        Token::Title { item, .. } if *item == candidate.item_id => weights.w_title,
        Token::Genre(g) if *g == candidate.genre => weights.w_genre,
        Token::Pref(g) if *g == candidate.genre => weights.w_pref,
        Token::Tag(t) if candidate.has_tag(*t) => weights.w_tag,
        _ => 0.0,
    }
}

pub fn oracle_scores(
    context: &VerbalizedContext,
    candidates: &[u32],
    catalog: &Catalog,
    weights: &OracleWeights,
) -> Result<Vec<f64>> {
    candidates
        .iter()
        .map(|c| {
            let meta = catalog.get(*c)?;
            Ok(context
                .tokens
                .iter()
                .map(|t| token_weight(t, meta, weights))
                .sum())
        })
        .collect()
}

/// Argmax with ties to the lowest index.
pub fn oracle_predict(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn length_reward(ratio: f64, shape: &LengthShape) -> f64 {
    if ratio < shape.lo_one {
        ((ratio - shape.lo_zero) / (shape.lo_one - shape.lo_zero)).clamp(0.0, 1.0)
    } else if ratio <= shape.hi_one {
        1.0
    } else {
        ((shape.hi_zero - ratio) / (shape.hi_zero - shape.hi_one)).clamp(0.0, 1.0)
    }
}

/// `1 - (rank - 1) / (N - 1)`, where rank counts strictly better candidates
/// and equal-scored ones at lower indices.
pub fn ranking_reward(scores: &[f64], target_index: usize) -> f64 {
    let n = scores.len();
    assert!(n >= 2, "ranking reward needs at least two candidates");
    let s = scores[target_index];
    let ahead = scores
        .iter()
        .enumerate()
        .filter(|(i, x)| **x > s || (**x == s && *i < target_index))
        .count();
    1.0 - ahead as f64 / (n - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub r_acc: f64,
    pub r_len: f64,
    pub r_total: f64,
    pub compression_ratio: f64,
}

impl RewardBreakdown {
    pub fn blend(r_acc: f64, r_len: f64, alpha: f64, compression_ratio: f64) -> Self {
        RewardBreakdown {
            r_acc,
            r_len,
            r_total: alpha * r_acc + (1.0 - alpha) * r_len,
            compression_ratio,
        }
    }
}

/// Reward of one verbalization. `r_acc` is always the 0/1 hit; the blended
/// total uses the rank-linear score instead when `signal` is `Ranking`.
pub fn stage1_reward(
    context: &VerbalizedContext,
    episode: &EpisodeInstance,
    catalog: &Catalog,
    reward: &RewardConfig,
    weights: &OracleWeights,
) -> Result<RewardBreakdown> {
    if context.source_template_len == 0 {
        return Err(Error::Internal("source template length is zero".into()));
    }
    let scores = oracle_scores(context, &episode.candidates, catalog, weights)?;
    let hit = (oracle_predict(&scores) == episode.target_index) as u8 as f64;
    let ratio = context.compression_ratio();
    let r_len = length_reward(ratio, &reward.length_shape);
    let signal = match reward.signal {
        AccuracySignal::Accuracy => hit,
        AccuracySignal::Ranking => ranking_reward(&scores, episode.target_index),
    };
    let mut out = RewardBreakdown::blend(signal, r_len, reward.alpha, ratio);
    out.r_acc = hit;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Genre, Tag, DurationBucket};

    fn meta(id: u32, genre: Genre, tags: [usize; 3]) -> ItemMeta {
        ItemMeta {
            item_id: id,
            title_tokens: ["foo".into(), "bar".into()],
            genre,
            tags: tags.map(|t| Tag::new(t).unwrap()),
            year: 2001,
        }
    }

    fn small_catalog() -> Catalog {
        Catalog::new(vec![
            meta(7, Genre::Comedy, [0, 1, 2]),
            meta(8, Genre::Scifi, [3, 4, 5]),
            meta(9, Genre::Drama, [6, 7, 8]),
        ])
        .unwrap()
    }

    fn ctx(tokens: Vec<Token>) -> VerbalizedContext {
        VerbalizedContext {
            source_template_len: 8,
            tokens,
        }
    }

    #[test]
    fn token_weights() {
        let w = OracleWeights::default();
        let scifi = meta(8, Genre::Scifi, [3, 4, 5]);
        assert_eq!(token_weight(&Token::Genre(Genre::Scifi), &scifi, &w), 1.0);
        assert_eq!(token_weight(&Token::Pref(Genre::Scifi), &scifi, &w), 3.0);
        assert_eq!(token_weight(&Token::Date(20250608), &scifi, &w), 0.0);
        assert_eq!(token_weight(&Token::Tag(Tag::new(4).unwrap()), &scifi, &w), 0.5);
        assert_eq!(token_weight(&Token::Dur(DurationBucket::Long), &scifi, &w), 0.0);
    }

    #[test]
    fn worked_scores() {
        let cat = small_catalog();
        let w = OracleWeights::default();
        let mut tokens = vec![
            Token::Genre(Genre::Scifi),
            Token::Genre(Genre::Scifi),
            Token::Title { item: 7, word: 0 },
            Token::Title { item: 7, word: 1 },
        ];
        let s = oracle_scores(&ctx(tokens.clone()), &[7, 8, 9], &cat, &w).unwrap();
        assert_eq!(s, vec![2.0, 2.0, 0.0]);
        assert_eq!(oracle_predict(&s), 0);
        tokens.push(Token::Pref(Genre::Scifi));
        let s = oracle_scores(&ctx(tokens), &[7, 8, 9], &cat, &w).unwrap();
        assert_eq!(s, vec![2.0, 5.0, 0.0]);
        assert_eq!(oracle_predict(&s), 1);
        let s = oracle_scores(&ctx(vec![]), &[7, 8, 9], &cat, &w).unwrap();
        assert_eq!(s, vec![0.0; 3]);
        assert_eq!(oracle_predict(&s), 0);
    }

    #[test]
    fn unknown_candidate_is_error() {
        let r = oracle_scores(&ctx(vec![]), &[1234], &small_catalog(), &OracleWeights::default());
        assert!(matches!(r, Err(Error::UnknownItem(1234))));
    }

    #[test]
    fn length_reward_knots() {
        let s = LengthShape::default();
        assert_eq!(length_reward(0.5, &s), 1.0);
        assert!((length_reward(0.175, &s) - 0.5).abs() < 1e-12);
        assert_eq!(length_reward(1.3, &s), 0.0);
        assert_eq!(length_reward(0.0, &s), 0.0);
        assert!((length_reward(0.95, &s) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ranking_reward_examples() {
        let mut scores = vec![1.0; 10];
        scores[4] = 5.0;
        assert_eq!(ranking_reward(&scores, 4), 1.0);
        let mut scores = vec![1.0; 10];
        scores[4] = 0.0;
        assert_eq!(ranking_reward(&scores, 4), 0.0);
        let scores: Vec<f64> = (0..10).map(|i| 10.0 - i as f64).collect();
        assert!((ranking_reward(&scores, 3) - (1.0 - 3.0 / 9.0)).abs() < 1e-9);
        // ties count against the target only from lower indices
        assert!((ranking_reward(&[2.0, 2.0, 2.0], 1) - 0.5).abs() < 1e-12);
    }
}
