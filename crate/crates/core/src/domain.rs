//! Core data model: catalog items, interaction records, reranking episodes,
//! the token alphabet verbalizations are written in, and the JSONL codec.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const N_CANDIDATES: usize = 10;
pub const MAX_HISTORY: usize = 100;
pub const N_GENRES: usize = 8;
pub const N_TAGS: usize = 30;
pub const TAGS_PER_ITEM: usize = 3;
pub const YEAR_RANGE: (u16, u16) = (1980, 2026);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Genre {
    Action,
    Comedy,
    Drama,
    Horror,
    Scifi,
    Romance,
    Documentary,
    Animation,
}

impl Genre {
    pub const ALL: [Genre; N_GENRES] = [
        Genre::Action,
        Genre::Comedy,
        Genre::Drama,
        Genre::Horror,
        Genre::Scifi,
        Genre::Romance,
        Genre::Documentary,
        Genre::Animation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Genre {
        Genre::ALL[i]
    }

    pub fn label(self) -> &'static str {
        match self {
            Genre::Action => "action",
            Genre::Comedy => "comedy",
            Genre::Drama => "drama",
            Genre::Horror => "horror",
            Genre::Scifi => "scifi",
            Genre::Romance => "romance",
            Genre::Documentary => "documentary",
            Genre::Animation => "animation",
        }
    }
}

const TAG_LABELS: [&str; N_TAGS] = [
    "dark",
    "nostalgic",
    "supernatural",
    "witty",
    "heartfelt",
    "gritty",
    "epic",
    "quirky",
    "suspenseful",
    "romantic",
    "violent",
    "uplifting",
    "cerebral",
    "slowburn",
    "fastpaced",
    "family",
    "ensemble",
    "historical",
    "futuristic",
    "mysterious",
    "satirical",
    "tragic",
    "feelgood",
    "offbeat",
    "intense",
    "inspiring",
    "chilling",
    "whimsical",
    "political",
    "musical",
];

/// One of the 30 plot tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tag(u8);

impl Tag {
    pub fn new(index: usize) -> Option<Tag> {
        (index < N_TAGS).then_some(Tag(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn label(self) -> &'static str {
        TAG_LABELS[self.index()]
    }

    pub fn from_label(label: &str) -> Option<Tag> {
        TAG_LABELS.iter().position(|l| *l == label).map(|i| Tag(i as u8))
    }
}

impl Serialize for Tag {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let label = String::deserialize(d)?;
        Tag::from_label(&label)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown tag `{label}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engagement {
    Play,
    ThumbUp,
    AddToList,
}

impl Engagement {
    pub fn label(self) -> &'static str {
        match self {
            Engagement::Play => "play",
            Engagement::ThumbUp => "thumb_up",
            Engagement::AddToList => "add_to_list",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DurationBucket {
    Short,
    Medium,
    Long,
}

impl DurationBucket {
    /// short < 10 min, medium 10..=60, long > 60.
    pub fn of(minutes: f64) -> DurationBucket {
        if minutes < 10.0 {
            DurationBucket::Short
        } else if minutes <= 60.0 {
            DurationBucket::Medium
        } else {
            DurationBucket::Long
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DurationBucket::Short => "short",
            DurationBucket::Medium => "med",
            DurationBucket::Long => "long",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemMeta {
    #[serde(rename = "item")]
    pub item_id: u32,
    #[serde(rename = "title")]
    pub title_tokens: [String; 2],
    pub genre: Genre,
    pub tags: [Tag; TAGS_PER_ITEM],
    pub year: u16,
}

impl ItemMeta {
    pub fn has_tag(&self, tag: Tag) -> bool {
        self.tags.contains(&tag)
    }

    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let id = self.item_id;
        for (i, w) in self.title_tokens.iter().enumerate() {
            if w.is_empty() || w.chars().any(|c| !c.is_ascii_lowercase()) {
                v.push(format!("item {id}: title[{i}] must be a lowercase word"));
            }
        }
        let distinct: HashSet<_> = self.tags.iter().collect();
        if distinct.len() != TAGS_PER_ITEM {
            v.push(format!("item {id}: tags must be {TAGS_PER_ITEM} distinct labels"));
        }
        if self.year < YEAR_RANGE.0 || self.year > YEAR_RANGE.1 {
            v.push(format!("item {id}: year {} outside [1980, 2026]", self.year));
        }
        v
    }
}

/// Item metadata indexed by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    items: Vec<ItemMeta>,
    index: HashMap<u32, usize>,
}

impl Catalog {
    pub fn new(items: Vec<ItemMeta>) -> Result<Catalog> {
        let mut violations: Vec<String> = items.iter().flat_map(ItemMeta::violations).collect();
        let mut index = HashMap::with_capacity(items.len());
        for (pos, item) in items.iter().enumerate() {
            if index.insert(item.item_id, pos).is_some() {
                violations.push(format!("item {}: duplicate id", item.item_id));
            }
        }
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        Ok(Catalog { items, index })
    }

    pub fn get(&self, id: u32) -> Result<&ItemMeta> {
        self.index
            .get(&id)
            .map(|&i| &self.items[i])
            .ok_or(Error::UnknownItem(id))
    }

    pub fn contains(&self, id: u32) -> bool {
        self.index.contains_key(&id)
    }

    pub fn items(&self) -> &[ItemMeta] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.items).expect("catalog serializes")
    }

    pub fn from_json(text: &str) -> Result<Catalog> {
        let items: Vec<ItemMeta> = serde_json::from_str(text).map_err(Error::from_json)?;
        Catalog::new(items)
    }
}

/// One history event. `noise` is a generator annotation; policies never read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionRecord {
    /// Days since 1970-01-01.
    pub day: u32,
    pub hour: u8,
    pub item: u32,
    pub eng: Engagement,
    pub dur: f64,
    #[serde(default)]
    pub noise: bool,
}

impl InteractionRecord {
    pub fn timestamp_hours(&self) -> u64 {
        self.day as u64 * 24 + self.hour as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserHistory {
    pub user_id: u64,
    pub records: Vec<InteractionRecord>,
}

impl UserHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains_item(&self, item: u32) -> bool {
        self.records.iter().any(|r| r.item == item)
    }

    /// Distinct item ids in first-seen order.
    pub fn distinct_items(&self) -> Vec<u32> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.item))
            .map(|r| r.item)
            .collect()
    }
}

/// One reranking task.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeInstance {
    pub history: UserHistory,
    pub candidates: Vec<u32>,
    pub target_index: usize,
    pub is_discovery: bool,
    /// Generator ground truth, kept for analysis only.
    pub debug_latent: Option<Vec<f64>>,
}

/// Flat JSONL layout of an episode.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpisodeWire {
    user_id: u64,
    records: Vec<InteractionRecord>,
    candidates: Vec<u32>,
    target_index: usize,
    is_discovery: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    debug_latent: Option<Vec<f64>>,
}

impl EpisodeInstance {
    pub fn target(&self) -> u32 {
        self.candidates[self.target_index]
    }
}

/// Lists every violated invariant; empty when the episode is well formed.
pub fn validate_episode(episode: &EpisodeInstance) -> Vec<String> {
    let mut v = Vec::new();
    let records = &episode.history.records;
    if records.is_empty() || records.len() > MAX_HISTORY {
        v.push(format!(
            "records: expected 1..={MAX_HISTORY}, got {}",
            records.len()
        ));
    }
    for (i, r) in records.iter().enumerate() {
        if !(r.dur.is_finite() && r.dur >= 0.0) {
            v.push(format!("records[{i}].dur: must be finite and >= 0"));
        }
        if r.hour >= 24 {
            v.push(format!("records[{i}].hour: must be < 24"));
        }
    }
    for (i, w) in records.windows(2).enumerate() {
        if w[1].timestamp_hours() < w[0].timestamp_hours() {
            v.push(format!("records[{}]: timestamp decreases", i + 1));
        }
    }
    if episode.candidates.len() != N_CANDIDATES {
        v.push(format!(
            "candidates: expected {N_CANDIDATES}, got {}",
            episode.candidates.len()
        ));
    }
    let mut seen = HashSet::new();
    for c in &episode.candidates {
        if !seen.insert(*c) {
            v.push(format!("candidates: duplicate id {c}"));
        }
    }
    if episode.target_index >= episode.candidates.len().min(N_CANDIDATES) {
        v.push(format!(
            "target_index: {} out of range",
            episode.target_index
        ));
    } else {
        let watched = episode.history.contains_item(episode.target());
        if episode.is_discovery == watched {
            v.push("is_discovery inconsistent".to_string());
        }
    }
    v
}

pub fn encode_episode(episode: &EpisodeInstance) -> String {
    let wire = EpisodeWire {
        user_id: episode.history.user_id,
        records: episode.history.records.clone(),
        candidates: episode.candidates.clone(),
        target_index: episode.target_index,
        is_discovery: episode.is_discovery,
        debug_latent: episode.debug_latent.clone(),
    };
    serde_json::to_string(&wire).expect("episode serializes")
}

pub fn decode_episode(line: &str) -> Result<EpisodeInstance> {
    let wire: EpisodeWire = serde_json::from_str(line).map_err(Error::from_json)?;
    let episode = EpisodeInstance {
        history: UserHistory {
            user_id: wire.user_id,
            records: wire.records,
        },
        candidates: wire.candidates,
        target_index: wire.target_index,
        is_discovery: wire.is_discovery,
        debug_latent: wire.debug_latent,
    };
    let violations = validate_episode(&episode);
    if violations.is_empty() {
        Ok(episode)
    } else {
        Err(Error::Validation(violations))
    }
}

/// Decodes a JSONL document; parse errors report the 1-based line in the file.
pub fn decode_episodes(text: &str) -> Result<Vec<EpisodeInstance>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            decode_episode(l).map_err(|e| match e {
                Error::Parse {
                    column, message, ..
                } => Error::Parse {
                    line: i + 1,
                    column,
                    message,
                },
                Error::Validation(v) => Error::Validation(
                    v.into_iter().map(|m| format!("line {}: {m}", i + 1)).collect(),
                ),
                other => other,
            })
        })
        .collect()
}

pub fn encode_episodes(episodes: &[EpisodeInstance]) -> String {
    let mut out = String::new();
    for e in episodes {
        out.push_str(&encode_episode(e));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Date,
    Dow,
    Hour,
    Id,
    Title,
    Genre,
    Tag,
    Year,
    Eng,
    Dur,
    Pref,
    Count,
}

/// A unit of verbalized context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    /// yyyymmdd
    Date(u32),
    /// 0 = Monday
    Dow(u8),
    Hour(u8),
    Id(u32),
    /// One word of an item's title; `word` is 0 or 1.
    Title { item: u32, word: u8 },
    Genre(Genre),
    Tag(Tag),
    Year(u16),
    Eng(Engagement),
    Dur(DurationBucket),
    Pref(Genre),
    Count(u32),
}

const DOW_LABELS: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];

impl Token {
    pub fn kind(&self) -> TokenKind {
        match self {
            Token::Date(_) => TokenKind::Date,
            Token::Dow(_) => TokenKind::Dow,
            Token::Hour(_) => TokenKind::Hour,
            Token::Id(_) => TokenKind::Id,
            Token::Title { .. } => TokenKind::Title,
            Token::Genre(_) => TokenKind::Genre,
            Token::Tag(_) => TokenKind::Tag,
            Token::Year(_) => TokenKind::Year,
            Token::Eng(_) => TokenKind::Eng,
            Token::Dur(_) => TokenKind::Dur,
            Token::Pref(_) => TokenKind::Pref,
            Token::Count(_) => TokenKind::Count,
        }
    }

    /// `KIND:payload`, resolving title words through the catalog.
    pub fn render(&self, catalog: &Catalog) -> Result<String> {
        Ok(match self {
            Token::Date(d) => format!("DATE:{d}"),
            Token::Dow(d) => format!("DOW:{}", DOW_LABELS[*d as usize % 7]),
            Token::Hour(h) => format!("HOUR:{h}"),
            Token::Id(id) => format!("ID:{id}"),
            Token::Title { item, word } => {
                let meta = catalog.get(*item)?;
                format!("TITLE:{}", meta.title_tokens[*word as usize])
            }
            Token::Genre(g) => format!("GENRE:{}", g.label()),
            Token::Tag(t) => format!("TAG:{}", t.label()),
            Token::Year(y) => format!("YEAR:{y}"),
            Token::Eng(e) => format!("ENG:{}", e.label()),
            Token::Dur(b) => format!("DUR:{}", b.label()),
            Token::Pref(g) => format!("PREF:{}", g.label()),
            Token::Count(n) => format!("COUNT:{n}"),
        })
    }
}

/// Rendered token sequence plus the template length of the same history,
/// which is the denominator of the compression ratio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbalizedContext {
    pub tokens: Vec<Token>,
    pub source_template_len: usize,
}

impl VerbalizedContext {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn compression_ratio(&self) -> f64 {
        self.tokens.len() as f64 / self.source_template_len as f64
    }

    pub fn render(&self, catalog: &Catalog) -> Result<String> {
        let words = self
            .tokens
            .iter()
            .map(|t| t.render(catalog))
            .collect::<Result<Vec<_>>>()?;
        Ok(words.join(" "))
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format!("{self:?}").to_uppercase())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_episode() -> EpisodeInstance {
        let records = (0..5)
            .map(|i| InteractionRecord {
                day: 20000 + i,
                hour: 20,
                item: 100 + (i % 3),
                eng: Engagement::Play,
                dur: 42.5,
                noise: i == 4,
            })
            .collect();
        EpisodeInstance {
            history: UserHistory {
                user_id: 9,
                records,
            },
            candidates: (200..210).collect(),
            target_index: 3,
            is_discovery: true,
            debug_latent: Some(vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        }
    }

    #[test]
    fn well_formed_episode_has_no_violations() {
        assert!(validate_episode(&sample_episode()).is_empty());
    }

    #[test]
    fn eleven_candidates_reported() {
        let mut e = sample_episode();
        e.candidates.push(999);
        assert_eq!(validate_episode(&e), vec!["candidates: expected 10, got 11"]);
    }

    #[test]
    fn watched_discovery_target_reported() {
        let mut e = sample_episode();
        e.candidates[3] = 101;
        assert_eq!(validate_episode(&e), vec!["is_discovery inconsistent"]);
    }

    #[test]
    fn decreasing_timestamps_and_bad_duration_reported() {
        let mut e = sample_episode();
        e.history.records[2].day = 1;
        e.history.records[0].dur = -1.0;
        let v = validate_episode(&e);
        assert!(v.iter().any(|m| m.starts_with("records[0].dur")), "{v:?}");
        assert!(v.iter().any(|m| m == "records[2]: timestamp decreases"), "{v:?}");
    }

    #[test]
    fn codec_round_trip_is_byte_stable() {
        let e = sample_episode();
        let line = encode_episode(&e);
        let back = decode_episode(&line).unwrap();
        assert_eq!(back, e);
        assert_eq!(encode_episode(&back), line);
    }

    #[test]
    fn wire_keys_are_fixed() {
        let line = encode_episode(&sample_episode());
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        let obj = v.as_object().unwrap();
        let mut keys: Vec<_> = obj.keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["candidates", "debug_latent", "is_discovery", "records", "target_index", "user_id"]
        );
        let rec = obj["records"][0].as_object().unwrap();
        let mut rkeys: Vec<_> = rec.keys().cloned().collect();
        rkeys.sort();
        assert_eq!(rkeys, ["day", "dur", "eng", "hour", "item", "noise"]);
    }

    #[test]
    fn missing_target_index_names_the_field() {
        let mut v: serde_json::Value =
            serde_json::from_str(&encode_episode(&sample_episode())).unwrap();
        v.as_object_mut().unwrap().remove("target_index");
        let err = decode_episode(&v.to_string()).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 1);
                assert!(message.contains("target_index"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_position() {
        let err = decode_episodes("{\"user_id\": 1}\n{oops").unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 1);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decode_rejects_invalid_episode() {
        let mut e = sample_episode();
        e.candidates.truncate(9);
        let err = decode_episode(&encode_episode(&e)).unwrap_err();
        assert!(matches!(err, Error::Validation(v) if v[0].starts_with("candidates")));
    }

    #[test]
    fn max_length_history_round_trips() {
        let mut e = sample_episode();
        e.history.records = (0..MAX_HISTORY as u32)
            .map(|i| InteractionRecord {
                day: 20000 + i,
                hour: (i % 24) as u8,
                item: 300 + i,
                eng: Engagement::AddToList,
                dur: 0.1 * i as f64,
                noise: false,
            })
            .collect();
        let back = decode_episode(&encode_episode(&e)).unwrap();
        assert_eq!(back.history.records.len(), 100);
        assert_eq!(back, e);
    }

    #[test]
    fn duration_buckets() {
        assert_eq!(DurationBucket::of(9.99), DurationBucket::Short);
        assert_eq!(DurationBucket::of(10.0), DurationBucket::Medium);
        assert_eq!(DurationBucket::of(60.0), DurationBucket::Medium);
        assert_eq!(DurationBucket::of(80.08), DurationBucket::Long);
    }

    #[test]
    fn catalog_rejects_duplicate_tags() {
        let item = ItemMeta {
            item_id: 1,
            title_tokens: ["a".into(), "b".into()],
            genre: Genre::Drama,
            tags: [Tag::new(0).unwrap(), Tag::new(0).unwrap(), Tag::new(1).unwrap()],
            year: 2000,
        };
        assert!(Catalog::new(vec![item]).is_err());
    }
}
