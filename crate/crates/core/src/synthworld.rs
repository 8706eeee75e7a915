//! Synthetic streaming world: catalog, users with latent genre tastes,
//! noisy viewing histories, and next-item reranking episodes.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{
    decode_episodes, encode_episodes, Catalog, EpisodeInstance, Engagement, Genre,
    InteractionRecord, ItemMeta, Tag, UserHistory, N_CANDIDATES, N_GENRES, N_TAGS, TAGS_PER_ITEM,
    YEAR_RANGE,
};
use crate::error::{Error, Result};
use crate::fsio;
use crate::par::Exec;
use crate::rng::{purpose, Xoshiro256};

pub const CATALOG_FILE: &str = "catalog.json";
pub const TRAIN_FILE: &str = "train.jsonl";
pub const EVAL_FILE: &str = "eval.jsonl";

/// First day of generated histories (2025-01-01).
const BASE_DAY: u32 = 20089;
const REPEAT_CAP: usize = 5;
const REWATCH_DISTRACTORS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub n_items: usize,
    pub n_genres: usize,
    pub n_tags: usize,
    pub n_train_episodes: usize,
    pub n_eval_episodes: usize,
    pub t_min: usize,
    pub t_max: usize,
    pub p_noise: f64,
    pub p_repeat: f64,
    pub repeat_cap: usize,
    pub p_rewatch_target: f64,
    pub dirichlet_alpha: f64,
    pub master_seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            n_items: 200,
            n_genres: N_GENRES,
            n_tags: N_TAGS,
            n_train_episodes: 2000,
            n_eval_episodes: 500,
            t_min: 20,
            t_max: 100,
            p_noise: 0.3,
            p_repeat: 0.25,
            repeat_cap: REPEAT_CAP,
            p_rewatch_target: 0.3,
            dirichlet_alpha: 0.3,
            master_seed: 1,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        for (name, p) in [
            ("p_noise", self.p_noise),
            ("p_repeat", self.p_repeat),
            ("p_rewatch_target", self.p_rewatch_target),
        ] {
            if !(0.0..=1.0).contains(&p) {
                v.push(format!("world.{name}: {p} not in [0, 1]"));
            }
        }
        if self.n_genres != N_GENRES {
            v.push(format!("world.n_genres: must be {N_GENRES}"));
        }
        if self.n_tags != N_TAGS {
            v.push(format!("world.n_tags: must be {N_TAGS}"));
        }
        if self.repeat_cap != REPEAT_CAP {
            v.push(format!("world.repeat_cap: must be {REPEAT_CAP}"));
        }
        if self.t_min == 0 || self.t_min > self.t_max || self.t_max > crate::domain::MAX_HISTORY {
            v.push(format!(
                "world.t_min/t_max: need 1 <= t_min <= t_max <= 100, got {}/{}",
                self.t_min, self.t_max
            ));
        }
        if self.n_eval_episodes == 0 {
            v.push("world.n_eval_episodes: must be > 0".into());
        }
        if !(self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite()) {
            v.push("world.dirichlet_alpha: must be positive".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }
}

/// Latent taste of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: u64,
    pub genre_pref: Vec<f64>,
}

impl UserProfile {
    /// The two highest-preference genres, ties to the lower index.
    pub fn top2(&self) -> [usize; 2] {
        let mut order: Vec<usize> = (0..self.genre_pref.len()).collect();
        order.sort_by(|&a, &b| {
            self.genre_pref[b]
                .partial_cmp(&self.genre_pref[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        [order[0], order[1]]
    }
}

const ONSETS: [&str; 16] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st",
];
const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];

fn pseudo_word(rng: &mut Xoshiro256) -> String {
    let syllables = rng.range_inclusive(2, 3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS[rng.below(ONSETS.len())]);
        w.push_str(VOWELS[rng.below(VOWELS.len())]);
    }
    if rng.bernoulli(0.4) {
        w.push(['n', 'r', 's', 'x'][rng.below(4)]);
    }
    w
}

pub fn gen_catalog(cfg: &WorldConfig, seed: u64) -> Result<Catalog> {
    if cfg.n_items < cfg.n_genres {
        return Err(Error::Generation(format!(
            "n_items {} < n_genres {}",
            cfg.n_items, cfg.n_genres
        )));
    }
    let mut rng = Xoshiro256::stream(seed, purpose::CATALOG, 0);
    let mut genres: Vec<usize> = (0..cfg.n_items).map(|i| i % cfg.n_genres).collect();
    rng.shuffle(&mut genres);
    let items = genres
        .into_iter()
        .enumerate()
        .map(|(id, g)| {
            let title_tokens = [pseudo_word(&mut rng), pseudo_word(&mut rng)];
            let mut pool: Vec<usize> = (0..N_TAGS).collect();
            // partial Fisher-Yates: first TAGS_PER_ITEM slots are a sample without replacement
            for k in 0..TAGS_PER_ITEM {
                let j = k + rng.below(N_TAGS - k);
                pool.swap(k, j);
            }
            let tags = [0, 1, 2].map(|k| Tag::new(pool[k]).unwrap());
            let year = rng.range_inclusive(YEAR_RANGE.0 as usize, YEAR_RANGE.1 as usize) as u16;
            ItemMeta {
                item_id: id as u32,
                title_tokens,
                genre: Genre::from_index(g),
                tags,
                year,
            }
        })
        .collect();
    Catalog::new(items)
}

pub fn gen_user_profile(user_id: u64, alpha: f64, rng: &mut Xoshiro256) -> UserProfile {
    UserProfile {
        user_id,
        genre_pref: rng.dirichlet(alpha, N_GENRES),
    }
}

/// Catalog plus per-genre item lists.
#[derive(Debug, Clone)]
pub struct World {
    pub catalog: Catalog,
    by_genre: Vec<Vec<u32>>,
}

impl World {
    pub fn new(catalog: Catalog) -> World {
        let mut by_genre = vec![Vec::new(); N_GENRES];
        for item in catalog.items() {
            by_genre[item.genre.index()].push(item.item_id);
        }
        World { catalog, by_genre }
    }

    pub fn items_in(&self, genre: usize) -> &[u32] {
        &self.by_genre[genre]
    }
}

fn signal_engagement(top_genre: bool, rng: &mut Xoshiro256) -> Engagement {
    let p_thumb = if top_genre { 0.2 } else { 0.05 };
    if rng.bernoulli(p_thumb) {
        Engagement::ThumbUp
    } else if rng.bernoulli(0.1) {
        Engagement::AddToList
    } else {
        Engagement::Play
    }
}

pub fn gen_history(
    profile: &UserProfile,
    world: &World,
    cfg: &WorldConfig,
    rng: &mut Xoshiro256,
) -> Result<UserHistory> {
    let catalog = &world.catalog;
    if catalog.is_empty() {
        return Err(Error::Generation("empty catalog".into()));
    }
    let top2 = profile.top2();
    let t_len = rng.range_inclusive(cfg.t_min, cfg.t_max);
    let mut hours = (BASE_DAY as u64 + rng.below(90) as u64) * 24 + rng.below(24) as u64;
    let mut records = Vec::with_capacity(t_len);
    // (item, genre, records so far, continue with another repeat)
    let mut run: Option<(u32, usize, usize)> = None;

    for step in 0..t_len {
        if step > 0 {
            hours += rng.range_inclusive(1, 48) as u64;
        }
        let (day, hour) = ((hours / 24) as u32, (hours % 24) as u8);

        if rng.bernoulli(cfg.p_noise) {
            run = None;
            let item = catalog.items()[rng.below(catalog.len())].item_id;
            records.push(InteractionRecord {
                day,
                hour,
                item,
                eng: Engagement::Play,
                dur: rng.uniform(0.5, 8.0),
                noise: true,
            });
            continue;
        }

        let (item, genre, fresh) = match run {
            Some((item, genre, n)) => {
                run = if n + 1 < cfg.repeat_cap && rng.bernoulli(cfg.p_repeat) {
                    Some((item, genre, n + 1))
                } else {
                    None
                };
                (item, genre, false)
            }
            None => {
                let mut genre = rng.categorical(&profile.genre_pref);
                if world.items_in(genre).is_empty() {
                    genre = (0..N_GENRES)
                        .find(|g| !world.items_in(*g).is_empty())
                        .expect("nonempty catalog");
                }
                let pool = world.items_in(genre);
                (pool[rng.below(pool.len())], genre, true)
            }
        };
        let top = top2.contains(&genre);
        let eng = signal_engagement(top, rng);
        records.push(InteractionRecord {
            day,
            hour,
            item,
            eng,
            dur: rng.uniform(15.0, 95.0),
            noise: false,
        });
        if fresh && cfg.repeat_cap > 1 && rng.bernoulli(cfg.p_repeat) {
            run = Some((item, genre, 1));
        }
    }
    Ok(UserHistory {
        user_id: profile.user_id,
        records,
    })
}

fn sample_without_replacement(pool: &mut [u32], k: usize, rng: &mut Xoshiro256) -> Vec<u32> {
    let k = k.min(pool.len());
    for i in 0..k {
        let j = i + rng.below(pool.len() - i);
        pool.swap(i, j);
    }
    pool[..k].to_vec()
}

pub fn gen_episode(
    profile: &UserProfile,
    history: UserHistory,
    world: &World,
    cfg: &WorldConfig,
    rng: &mut Xoshiro256,
) -> Result<EpisodeInstance> {
    if history.is_empty() {
        return Err(Error::Generation("empty history".into()));
    }
    let catalog = &world.catalog;
    let watched: HashSet<u32> = history.records.iter().map(|r| r.item).collect();
    let mut signal_items: Vec<u32> = Vec::new();
    for r in history.records.iter().filter(|r| !r.noise) {
        if !signal_items.contains(&r.item) {
            signal_items.push(r.item);
        }
    }

    let rewatch = rng.bernoulli(cfg.p_rewatch_target) && !signal_items.is_empty();
    let target = if rewatch {
        signal_items[rng.below(signal_items.len())]
    } else {
        let top2 = profile.top2();
        let weights = [profile.genre_pref[top2[0]], profile.genre_pref[top2[1]]];
        let first = top2[rng.categorical(&weights)];
        let order = std::iter::once(first).chain(top2).chain(0..N_GENRES);
        let mut chosen = None;
        for g in order {
            let unwatched: Vec<u32> = world
                .items_in(g)
                .iter()
                .copied()
                .filter(|i| !watched.contains(i))
                .collect();
            if !unwatched.is_empty() {
                chosen = Some(unwatched[rng.below(unwatched.len())]);
                break;
            }
        }
        chosen.ok_or_else(|| Error::Generation("no unwatched item for a discovery target".into()))?
    };
    let target_genre = catalog.get(target)?.genre;

    let mut watched_pool: Vec<u32> = history
        .distinct_items()
        .into_iter()
        .filter(|i| *i != target)
        .collect();
    let mut candidates = vec![target];
    candidates.extend(sample_without_replacement(
        &mut watched_pool,
        REWATCH_DISTRACTORS,
        rng,
    ));

    let mut off_genre: Vec<u32> = catalog
        .items()
        .iter()
        .filter(|m| m.genre != target_genre && !watched.contains(&m.item_id))
        .map(|m| m.item_id)
        .collect();
    let needed = N_CANDIDATES - candidates.len();
    if off_genre.len() < needed {
        return Err(Error::Generation(format!(
            "catalog has {} eligible distractors, need {needed}",
            off_genre.len()
        )));
    }
    candidates.extend(sample_without_replacement(&mut off_genre, needed, rng));
    rng.shuffle(&mut candidates);
    let target_index = candidates.iter().position(|c| *c == target).unwrap();

    Ok(EpisodeInstance {
        is_discovery: !watched.contains(&target),
        history,
        candidates,
        target_index,
        debug_latent: Some(profile.genre_pref.clone()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub catalog: Catalog,
    pub train: Vec<EpisodeInstance>,
    pub eval: Vec<EpisodeInstance>,
}

fn gen_split(
    world: &World,
    cfg: &WorldConfig,
    stream: u64,
    n: usize,
    first_user: u64,
    exec: Exec,
) -> Result<Vec<EpisodeInstance>> {
    exec.try_map_range(n, |i| {
        let mut rng = Xoshiro256::stream(cfg.master_seed, stream, i as u64);
        let profile = gen_user_profile(first_user + i as u64, cfg.dirichlet_alpha, &mut rng);
        let history = gen_history(&profile, world, cfg, &mut rng)?;
        gen_episode(&profile, history, world, cfg, &mut rng)
    })
}

/// Fresh user per episode; train users are `0..n_train`, eval users follow.
pub fn gen_dataset(cfg: &WorldConfig, exec: Exec) -> Result<Dataset> {
    cfg.validate()?;
    let world = World::new(gen_catalog(cfg, cfg.master_seed)?);
    let train = gen_split(
        &world,
        cfg,
        purpose::TRAIN_EPISODE,
        cfg.n_train_episodes,
        0,
        exec,
    )?;
    let eval = gen_split(
        &world,
        cfg,
        purpose::EVAL_EPISODE,
        cfg.n_eval_episodes,
        cfg.n_train_episodes as u64,
        exec,
    )?;
    Ok(Dataset {
        catalog: world.catalog,
        train,
        eval,
    })
}

pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fsio::write_atomic(&dir.join(CATALOG_FILE), dataset.catalog.to_json().as_bytes())?;
    fsio::write_atomic(&dir.join(TRAIN_FILE), encode_episodes(&dataset.train).as_bytes())?;
    fsio::write_atomic(&dir.join(EVAL_FILE), encode_episodes(&dataset.eval).as_bytes())?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let catalog = Catalog::from_json(&fsio::read_string(&dir.join(CATALOG_FILE))?)?;
    let load = |name: &str| -> Result<Vec<EpisodeInstance>> {
        let path = dir.join(name);
        decode_episodes(&fsio::read_string(&path)?).map_err(|e| match e {
            Error::Parse {
                line,
                column,
                message,
            } => Error::Parse {
                line,
                column,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })
    };
    Ok(Dataset {
        train: load(TRAIN_FILE)?,
        eval: load(EVAL_FILE)?,
        catalog,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::validate_episode;

    fn small_cfg() -> WorldConfig {
        WorldConfig {
            n_train_episodes: 50,
            n_eval_episodes: 20,
            ..WorldConfig::default()
        }
    }

    #[test]
    fn catalog_is_deterministic() {
        let cfg = WorldConfig::default();
        let a = gen_catalog(&cfg, 1).unwrap();
        let b = gen_catalog(&cfg, 1).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn catalog_seed_changes_titles() {
        let cfg = WorldConfig::default();
        let titles = |seed| -> HashSet<[String; 2]> {
            gen_catalog(&cfg, seed)
                .unwrap()
                .items()
                .iter()
                .map(|m| m.title_tokens.clone())
                .collect()
        };
        assert_ne!(titles(1), titles(2));
    }

    #[test]
    fn eight_items_one_per_genre() {
        let cfg = WorldConfig {
            n_items: 8,
            ..WorldConfig::default()
        };
        let cat = gen_catalog(&cfg, 3).unwrap();
        let genres: HashSet<Genre> = cat.items().iter().map(|m| m.genre).collect();
        assert_eq!(genres.len(), 8);
    }

    #[test]
    fn default_catalog_genre_counts() {
        let cat = gen_catalog(&WorldConfig::default(), 1).unwrap();
        let mut counts = [0; N_GENRES];
        for m in cat.items() {
            counts[m.genre.index()] += 1;
        }
        assert!(counts.iter().all(|&c| c >= 20), "{counts:?}");
    }

    #[test]
    fn too_few_items_rejected() {
        let cfg = WorldConfig {
            n_items: 7,
            ..WorldConfig::default()
        };
        assert!(gen_catalog(&cfg, 1).is_err());
    }

    #[test]
    fn profile_is_deterministic() {
        let mut a = Xoshiro256::from_seed(42);
        let mut b = Xoshiro256::from_seed(42);
        assert_eq!(
            gen_user_profile(0, 0.3, &mut a),
            gen_user_profile(0, 0.3, &mut b)
        );
    }

    #[test]
    fn no_noise_when_disabled() {
        let cfg = WorldConfig {
            p_noise: 0.0,
            ..WorldConfig::default()
        };
        let world = World::new(gen_catalog(&cfg, 1).unwrap());
        let mut rng = Xoshiro256::from_seed(9);
        for u in 0..30 {
            let p = gen_user_profile(u, 0.3, &mut rng);
            let h = gen_history(&p, &world, &cfg, &mut rng).unwrap();
            assert!(h.records.iter().all(|r| !r.noise));
        }
    }

    #[test]
    fn certain_repeat_runs_fill_the_cap() {
        let cfg = WorldConfig {
            p_noise: 0.0,
            p_repeat: 1.0,
            ..WorldConfig::default()
        };
        let world = World::new(gen_catalog(&cfg, 1).unwrap());
        let mut rng = Xoshiro256::from_seed(4);
        for u in 0..20 {
            let p = gen_user_profile(u, 0.3, &mut rng);
            let h = gen_history(&p, &world, &cfg, &mut rng).unwrap();
            // records come in blocks of 5 identical items (the last may be cut short)
            for (k, chunk) in h.records.chunks(5).enumerate() {
                assert!(chunk.iter().all(|r| r.item == chunk[0].item), "user {u} block {k}");
            }
        }
    }

    #[test]
    fn timestamps_strictly_increase() {
        let cfg = WorldConfig::default();
        let world = World::new(gen_catalog(&cfg, 1).unwrap());
        let mut rng = Xoshiro256::from_seed(8);
        let p = gen_user_profile(0, 0.3, &mut rng);
        let h = gen_history(&p, &world, &cfg, &mut rng).unwrap();
        assert!((20..=100).contains(&h.len()));
        for w in h.records.windows(2) {
            let d = w[1].timestamp_hours() - w[0].timestamp_hours();
            assert!((1..=48).contains(&d));
        }
    }

    #[test]
    fn all_discovery_without_rewatch() {
        let cfg = WorldConfig {
            p_rewatch_target: 0.0,
            ..small_cfg()
        };
        let ds = gen_dataset(&cfg, Exec::Sequential).unwrap();
        assert!(ds.train.iter().chain(&ds.eval).all(|e| e.is_discovery));
    }

    #[test]
    fn single_watched_item_limits_rewatch_distractors() {
        let cfg = WorldConfig::default();
        let world = World::new(gen_catalog(&cfg, 1).unwrap());
        let mut rng = Xoshiro256::from_seed(2);
        let profile = gen_user_profile(0, 0.3, &mut rng);
        let history = UserHistory {
            user_id: 0,
            records: vec![InteractionRecord {
                day: BASE_DAY,
                hour: 3,
                item: 17,
                eng: Engagement::Play,
                dur: 30.0,
                noise: false,
            }],
        };
        for _ in 0..50 {
            let e = gen_episode(&profile, history.clone(), &world, &cfg, &mut rng).unwrap();
            let rewatch = e.candidates.iter().filter(|c| **c == 17).count();
            assert!(rewatch <= 1);
            assert!(validate_episode(&e).is_empty());
        }
    }

    #[test]
    fn generated_episodes_validate() {
        let ds = gen_dataset(&small_cfg(), Exec::Parallel).unwrap();
        for e in ds.train.iter().chain(&ds.eval) {
            assert!(validate_episode(e).is_empty());
            if e.is_discovery {
                assert!(!e.history.contains_item(e.target()));
            }
        }
    }

    #[test]
    fn parallel_and_sequential_generation_agree() {
        let a = gen_dataset(&small_cfg(), Exec::Parallel).unwrap();
        let b = gen_dataset(&small_cfg(), Exec::Sequential).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_probability_rejected() {
        let cfg = WorldConfig {
            p_noise: 1.5,
            ..WorldConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
