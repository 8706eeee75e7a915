use crate::domain::{Catalog, DurationBucket, Engagement, Genre, UserHistory};
use crate::error::Result;

pub const N_FEATURES: usize = 10;
pub const REPEAT_CAP: usize = 5;

/// `[bias, play, thumb_up, add_to_list, short, med, long, recency, same_item_as_prev, run_length]`
pub type FeatureVector = [f64; N_FEATURES];

/// Observable per-interaction features. Built only from engagement,
/// duration, position and item identity; the generator's noise flag is
/// never consulted.
pub fn interaction_features(history: &UserHistory, t: usize) -> FeatureVector {
    let records = &history.records;
    let r = &records[t];
    let mut f = [0.0; N_FEATURES];
    f[0] = 1.0;
    f[1 + match r.eng {
        Engagement::Play => 0,
        Engagement::ThumbUp => 1,
        Engagement::AddToList => 2,
    }] = 1.0;
    f[4 + match DurationBucket::of(r.dur) {
        DurationBucket::Short => 0,
        DurationBucket::Medium => 1,
        DurationBucket::Long => 2,
    }] = 1.0;
    let bucket = (3 * t / records.len()).min(2);
    f[7] = bucket as f64 / 2.0;
    f[8] = if t > 0 && records[t - 1].item == r.item {
        1.0
    } else {
        0.0
    };
    let run = records[..=t]
        .iter()
        .rev()
        .take_while(|x| x.item == r.item)
        .count();
    f[9] = run.min(REPEAT_CAP) as f64 / REPEAT_CAP as f64;
    f
}

/// Everything a verbalizer policy may observe about one history.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryView {
    pub features: Vec<FeatureVector>,
    pub items: Vec<u32>,
    pub genres: Vec<Genre>,
    /// MERGE_PREV is only available when the previous record has the same item.
    pub merge_allowed: Vec<bool>,
}

impl HistoryView {
    pub fn new(history: &UserHistory, catalog: &Catalog) -> Result<HistoryView> {
        let n = history.len();
        let mut genres = Vec::with_capacity(n);
        for r in &history.records {
            genres.push(catalog.get(r.item)?.genre);
        }
        let items: Vec<u32> = history.records.iter().map(|r| r.item).collect();
        Ok(HistoryView {
            features: (0..n).map(|t| interaction_features(history, t)).collect(),
            merge_allowed: (0..n).map(|t| t > 0 && items[t - 1] == items[t]).collect(),
            items,
            genres,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}
