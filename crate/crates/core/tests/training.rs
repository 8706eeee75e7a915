//! Training-loop contracts of the group-relative optimizer on small problems.

use verblab::config::GlobalConfig;
use verblab::eval::{train_reasoner, train_verbalizer};
use verblab::grpo::{
    adam_step, finite_diff_check, group_advantages, grpo_evaluate, run_grpo, AdamState, GroupMember, GrpoConfig,
    RolloutGroup, RolloutOutcome,
};
use verblab::par::Exec;
use verblab::policy::PolicyModel;
use verblab::reasoner::{CandidateMatrix, ReasonerModel};
use verblab::rng::Xoshiro256;
use verblab::synthworld::{gen_dataset, Dataset, WorldConfig};
use verblab::verbalizer::{PolicyKind, Verbalizer};

fn small_config(iterations: usize) -> GlobalConfig {
    let mut cfg = GlobalConfig {
        world: WorldConfig {
            n_train_episodes: 48,
            n_eval_episodes: 16,
            ..WorldConfig::default()
        },
        ..GlobalConfig::default()
    };
    cfg.grpo_stage1.iterations = iterations;
    cfg.grpo_stage2.iterations = iterations;
    cfg
}

fn small_dataset(cfg: &GlobalConfig) -> Dataset {
    gen_dataset(&cfg.world, Exec::default()).unwrap()
}

fn matrices(n: usize) -> Vec<CandidateMatrix> {
    let mut rng = Xoshiro256::from_seed(4);
    (0..n)
        .map(|_| {
            let mut m = [[0.0; 6]; 10];
            for row in m.iter_mut() {
                row[0] = 1.0;
                for f in &mut row[1..] {
                    *f = rng.next_f64();
                }
            }
            m
        })
        .collect()
}

#[test]
fn surrogate_is_zero_at_the_sampling_policy_with_centered_advantages() {
    let mats = matrices(1);
    let params = vec![0.3, -0.2, 0.5, 0.1, 0.0, -0.4];
    let cfg = GrpoConfig {
        group_size: 4,
        ..GrpoConfig::default()
    };
    let mut rng = Xoshiro256::from_seed(9);
    let members = group_advantages(&[1.0, 0.0, 0.0, 1.0], cfg.eps_adv)
        .into_iter()
        .map(|advantage| {
            let trace = ReasonerModel.sample(&params, &mats[0], &mut rng);
            GroupMember {
                ref_logprobs: trace.logprobs.clone(),
                trace,
                advantage,
            }
        })
        .collect();
    let groups = [RolloutGroup {
        input: &mats[0],
        members,
    }];
    let ev = grpo_evaluate(&ReasonerModel, &params, &groups, &cfg, Exec::Sequential).unwrap();
    assert!(ev.objective.abs() < 1e-12, "J = {}", ev.objective);
    assert_eq!(ev.max_ratio_dev, 0.0);
}

#[test]
fn finite_differences_on_a_quadratic() {
    let p = [0.3, -1.2, 2.5, 0.0];
    let analytic: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
    let err = finite_diff_check(|q| q.iter().map(|x| x * x).sum(), &analytic, &p, 1e-5);
    assert!(err < 1e-8, "{err}");
}

#[test]
fn adam_ascends() {
    let mut params = vec![0.0; 3];
    let mut state = AdamState::new(3);
    for _ in 0..200 {
        // gradient of -(p - target)^2
        let grad: Vec<f64> = params.iter().zip([1.0, -2.0, 0.5]).map(|(p, t)| -2.0 * (p - t)).collect();
        adam_step(&mut state, &mut params, &grad, 0.05).unwrap();
    }
    for (p, t) in params.iter().zip([1.0, -2.0, 0.5]) {
        assert!((p - t).abs() < 0.1, "{params:?}");
    }
}

fn constant_score(_: usize, _: &[u8]) -> verblab::Result<RolloutOutcome> {
    Ok(RolloutOutcome {
        reward: 0.5,
        r_acc: 0.0,
        r_len: 0.0,
        ratio: 1.0,
    })
}

#[test]
fn zero_iterations_leave_params_untouched() {
    let mats = matrices(4);
    let init = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
    let cfg = GrpoConfig {
        iterations: 0,
        ..GrpoConfig::default()
    };
    let (params, log) = run_grpo(&ReasonerModel, &mats, constant_score, init.clone(), &cfg, 1, 9, Exec::default()).unwrap();
    assert_eq!(params, init);
    assert!(log.rows.is_empty());
}

#[test]
fn equal_rewards_without_kl_do_not_move_params() {
    let mats = matrices(4);
    let init = vec![0.1, -0.2, 0.3, 0.0, 0.5, -0.6];
    let cfg = GrpoConfig {
        iterations: 20,
        batch_episodes: 4,
        beta_kl: 0.0,
        ..GrpoConfig::default()
    };
    let (params, log) = run_grpo(&ReasonerModel, &mats, constant_score, init.clone(), &cfg, 1, 9, Exec::default()).unwrap();
    assert_eq!(params, init);
    assert_eq!(log.rows.len(), 20);
}

#[test]
fn one_inner_epoch_never_leaves_the_sampling_policy() {
    let mats = matrices(8);
    let cfg = GrpoConfig {
        iterations: 15,
        inner_epochs: 1,
        batch_episodes: 8,
        ..GrpoConfig::default()
    };
    let score = |i: usize, c: &[u8]| -> verblab::Result<RolloutOutcome> {
        let hit = (c[0] as usize == i % 10) as u8 as f64;
        Ok(RolloutOutcome {
            reward: hit,
            r_acc: hit,
            r_len: 0.0,
            ratio: 1.0,
        })
    };
    let (_, log) = run_grpo(&ReasonerModel, &mats, score, vec![0.0; 6], &cfg, 3, 9, Exec::default()).unwrap();
    assert!(log.rows.iter().all(|r| r.max_ratio_dev == 0.0));
    let two = GrpoConfig {
        inner_epochs: 2,
        ..cfg
    };
    let (_, log) = run_grpo(&ReasonerModel, &mats, score, vec![0.0; 6], &two, 3, 9, Exec::default()).unwrap();
    assert!(log.rows.iter().any(|r| r.max_ratio_dev > 0.0));
}

#[test]
fn training_is_reproducible_across_exec_modes() {
    let cfg = small_config(25);
    let ds = small_dataset(&cfg);
    for kind in [PolicyKind::Action, PolicyKind::Rewrite] {
        let seq = train_verbalizer(&cfg, &ds, kind, &cfg.reward, 7, Exec::Sequential).unwrap();
        let par = train_verbalizer(&cfg, &ds, kind, &cfg.reward, 7, Exec::Parallel).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq.1.rows.len(), 25);
        assert!(seq.0.iter().all(|p| p.is_finite()));
        let other = train_verbalizer(&cfg, &ds, kind, &cfg.reward, 8, Exec::Parallel).unwrap();
        assert_ne!(seq.0, other.0);
    }
    let seq = train_reasoner(&cfg, &ds, &Verbalizer::Template, 7, Exec::Sequential).unwrap();
    let par = train_reasoner(&cfg, &ds, &Verbalizer::Template, 7, Exec::Parallel).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn invalid_grpo_config_is_rejected_before_training() {
    let mats = matrices(2);
    for cfg in [
        GrpoConfig {
            group_size: 1,
            ..GrpoConfig::default()
        },
        GrpoConfig {
            eps_clip: 1.0,
            ..GrpoConfig::default()
        },
        GrpoConfig {
            inner_epochs: 0,
            ..GrpoConfig::default()
        },
    ] {
        let r = run_grpo(&ReasonerModel, &mats, constant_score, vec![0.0; 6], &cfg, 1, 9, Exec::default());
        assert!(r.is_err());
    }
}
