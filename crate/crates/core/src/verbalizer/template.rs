use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::domain::{
    Catalog, DurationBucket, Engagement, InteractionRecord, ItemMeta, Token, UserHistory,
    VerbalizedContext,
};
use crate::error::Result;

pub const TEMPLATE_TOKENS_PER_RECORD: usize = 8;

fn civil_date(epoch_day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1)
        .unwrap()
        .checked_add_days(Days::new(epoch_day as u64))
        .expect("epoch day in range")
}

/// `(yyyymmdd, weekday with Monday = 0)` of an epoch day.
pub fn date_parts(epoch_day: u32) -> (u32, u8) {
    let d = civil_date(epoch_day);
    let ymd = d.year() as u32 * 10_000 + d.month() * 100 + d.day();
    (ymd, d.weekday().num_days_from_monday() as u8)
}

pub fn epoch_day_of(year: i32, month: u32, day: u32) -> u32 {
    let d = NaiveDate::from_ymd_opt(year, month, day).expect("valid date");
    (d - NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()).num_days() as u32
}

pub(crate) fn title_tokens(item: u32) -> [Token; 2] {
    [Token::Title { item, word: 0 }, Token::Title { item, word: 1 }]
}

/// `[GENRE, TAG, TAG, TAG]`
pub(crate) fn enrichment_tokens(meta: &ItemMeta) -> [Token; 4] {
    [
        Token::Genre(meta.genre),
        Token::Tag(meta.tags[0]),
        Token::Tag(meta.tags[1]),
        Token::Tag(meta.tags[2]),
    ]
}

fn template_record(r: &InteractionRecord, out: &mut Vec<Token>) {
    let (ymd, dow) = date_parts(r.day);
    let [t0, t1] = title_tokens(r.item);
    out.extend([
        Token::Date(ymd),
        Token::Dow(dow),
        Token::Hour(r.hour),
        Token::Id(r.item),
        t0,
        t1,
        Token::Eng(r.eng),
        Token::Dur(DurationBucket::of(r.dur)),
    ]);
}

/// Field-by-field rendering, 8 tokens per record.
pub fn render_template(history: &UserHistory, catalog: &Catalog) -> Result<VerbalizedContext> {
    let mut tokens = Vec::with_capacity(history.len() * TEMPLATE_TOKENS_PER_RECORD);
    for r in &history.records {
        catalog.get(r.item)?;
        template_record(r, &mut tokens);
    }
    Ok(VerbalizedContext {
        tokens,
        source_template_len: history.len() * TEMPLATE_TOKENS_PER_RECORD,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicRules {
    pub min_duration: f64,
    pub keep_engagements: Vec<Engagement>,
}

impl Default for HeuristicRules {
    fn default() -> Self {
        HeuristicRules {
            min_duration: 10.0,
            keep_engagements: vec![Engagement::ThumbUp, Engagement::AddToList],
        }
    }
}

/// Untrained rule-based rewrite: keep substantial or explicitly positive
/// interactions and always attach metadata.
pub fn heuristic_verbalize(
    history: &UserHistory,
    catalog: &Catalog,
    rules: &HeuristicRules,
) -> Result<VerbalizedContext> {
    let mut tokens = Vec::new();
    for r in &history.records {
        let meta = catalog.get(r.item)?;
        if r.dur >= rules.min_duration || rules.keep_engagements.contains(&r.eng) {
            tokens.extend(title_tokens(r.item));
            tokens.push(Token::Eng(r.eng));
            tokens.extend(enrichment_tokens(meta));
        }
    }
    Ok(VerbalizedContext {
        tokens,
        source_template_len: history.len() * TEMPLATE_TOKENS_PER_RECORD,
    })
}
