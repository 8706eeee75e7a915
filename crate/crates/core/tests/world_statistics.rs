//! Corpus-level statistics of the synthetic world, estimated by Monte Carlo.

use std::collections::HashSet;

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Dirichlet, Distribution};

use verblab::domain::{Engagement, N_GENRES};
use verblab::par::Exec;
use verblab::rng::Xoshiro256;
use verblab::synthworld::{gen_dataset, gen_user_profile, load_dataset, write_dataset, WorldConfig};
use verblab::verbalizer::{heuristic_verbalize, HeuristicRules};

fn world(n_train: usize, n_eval: usize) -> WorldConfig {
    WorldConfig {
        n_train_episodes: n_train,
        n_eval_episodes: n_eval,
        ..WorldConfig::default()
    }
}

#[test]
fn dirichlet_max_component_mean_exceeds_threshold() {
    // reference estimate from an unrelated implementation
    let reference = Dirichlet::new([0.3; N_GENRES]).unwrap();
    let mut rng = StdRng::seed_from_u64(5);
    let ref_mean = (0..1000)
        .map(|_| reference.sample(&mut rng).into_iter().fold(0.0, f64::max))
        .sum::<f64>()
        / 1000.0;
    assert!(ref_mean > 0.4, "reference max-component mean {ref_mean}");

    let mut own = Xoshiro256::from_seed(5);
    let mut maxes = Vec::new();
    for u in 0..1000 {
        let p = gen_user_profile(u, 0.3, &mut own);
        assert!((p.genre_pref.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.genre_pref.iter().all(|x| *x >= 0.0));
        maxes.push(p.genre_pref.iter().cloned().fold(0.0, f64::max));
    }
    let mean = maxes.iter().sum::<f64>() / maxes.len() as f64;
    assert!(mean > 0.4, "max-component mean {mean}");
    // sampling error of a 1000-draw mean is about 0.006
    assert!((mean - ref_mean).abs() < 0.04, "{mean} vs reference {ref_mean}");
}

#[test]
fn noise_fraction_over_200_users() {
    let ds = gen_dataset(&world(200, 1), Exec::Sequential).unwrap();
    let (noise, total) = ds.train.iter().fold((0, 0), |(n, t), e| {
        (
            n + e.history.records.iter().filter(|r| r.noise).count(),
            t + e.history.len(),
        )
    });
    let frac = noise as f64 / total as f64;
    assert!((frac - 0.3).abs() <= 0.03, "noise fraction {frac}");
}

#[test]
fn discovery_fraction_over_500_episodes() {
    let ds = gen_dataset(&world(1, 500), Exec::Sequential).unwrap();
    let frac = ds.eval.iter().filter(|e| e.is_discovery).count() as f64 / 500.0;
    assert!((frac - 0.7).abs() <= 0.05, "discovery fraction {frac}");
}

#[test]
fn splits_are_disjoint_and_targets_consistent() {
    let ds = gen_dataset(&world(300, 200), Exec::default()).unwrap();
    let train: HashSet<u64> = ds.train.iter().map(|e| e.history.user_id).collect();
    let eval: HashSet<u64> = ds.eval.iter().map(|e| e.history.user_id).collect();
    assert_eq!(train.len(), 300);
    assert_eq!(eval.len(), 200);
    assert!(train.is_disjoint(&eval));
    for e in ds.train.iter().chain(&ds.eval) {
        let watched: HashSet<u32> = e.history.records.iter().map(|r| r.item).collect();
        assert_eq!(e.is_discovery, !watched.contains(&e.target()));
        assert!((1..=100).contains(&e.history.len()));
    }
}

#[test]
fn all_noise_histories_verbalize_to_nothing() {
    let cfg = WorldConfig {
        p_noise: 1.0,
        ..world(50, 1)
    };
    let ds = gen_dataset(&cfg, Exec::Sequential).unwrap();
    for e in &ds.train {
        for r in &e.history.records {
            assert!(r.noise && r.dur < 8.0 && r.eng == Engagement::Play);
        }
        let ctx = heuristic_verbalize(&e.history, &ds.catalog, &HeuristicRules::default()).unwrap();
        assert!(ctx.is_empty());
    }
}

#[test]
fn dataset_files_round_trip() {
    let ds = gen_dataset(&world(40, 20), Exec::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&ds, dir.path()).unwrap();
    assert_eq!(load_dataset(dir.path()).unwrap(), ds);
}

#[test]
fn master_seed_drives_everything() {
    let a = gen_dataset(&world(30, 10), Exec::default()).unwrap();
    let b = gen_dataset(&world(30, 10), Exec::Sequential).unwrap();
    assert_eq!(a, b);
    let other = WorldConfig {
        master_seed: 2,
        ..world(30, 10)
    };
    let c = gen_dataset(&other, Exec::default()).unwrap();
    let titles = |d: &verblab::synthworld::Dataset| -> Vec<[String; 2]> {
        d.catalog.items().iter().map(|m| m.title_tokens.clone()).collect()
    };
    assert_ne!(titles(&a), titles(&c));
}
