//! Built-in invariant and gradient suites behind the `check` subcommand.

use crate::domain::{Engagement, InteractionRecord, UserHistory, N_CANDIDATES};
use crate::error::Result;
use crate::grpo::{
    clipped_term, finite_diff_check, group_advantages, grpo_evaluate, grpo_objective, kl_k3, GroupMember,
    GrpoConfig, RolloutGroup,
};
use crate::oracle::{length_reward, oracle_predict, LengthShape};
use crate::par::Exec;
use crate::policy::PolicyModel;
use crate::reasoner::{CandidateMatrix, ReasonerModel, N_REASONER_FEATURES};
use crate::rng::Xoshiro256;
use crate::synthworld::{gen_catalog, gen_dataset, WorldConfig};
use crate::verbalizer::{ActionModel, HistoryView, RewriteModel};
use crate::domain::{encode_episodes, Catalog};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// A short random history over the first items of `catalog`, with repeats
/// common enough to exercise merges.
pub fn random_history(catalog: &Catalog, len: usize, rng: &mut Xoshiro256) -> UserHistory {
    let pool = catalog.len().min(4);
    let mut day = 20000;
    let mut records: Vec<InteractionRecord> = Vec::with_capacity(len);
    for _ in 0..len {
        let item = match records.last() {
            Some(prev) if rng.bernoulli(0.4) => prev.item,
            _ => catalog.items()[rng.below(pool)].item_id,
        };
        day += rng.below(3) as u32;
        records.push(InteractionRecord {
            day,
            hour: rng.below(24) as u8,
            item,
            eng: [Engagement::Play, Engagement::ThumbUp, Engagement::AddToList][rng.below(3)],
            dur: rng.uniform(1.0, 120.0),
            noise: false,
        });
    }
    UserHistory { user_id: 0, records }
}

fn jitter(base: &[f64], scale: f64, rng: &mut Xoshiro256) -> Vec<f64> {
    base.iter().map(|b| b + scale * rng.standard_normal()).collect()
}

/// Builds groups of `g` rollouts per input, sampled under `old` and
/// scored with random rewards, then returns the worst finite-difference
/// error of the analytic gradient at `params`.
pub fn gradient_check_error<M: PolicyModel>(
    model: &M,
    inputs: &[M::Input],
    g: usize,
    rng: &mut Xoshiro256,
) -> Result<f64> {
    let n = model.n_params();
    let params: Vec<f64> = (0..n).map(|_| 0.5 * rng.standard_normal()).collect();
    let old = jitter(&params, 0.15, rng);
    let reference = jitter(&params, 0.3, rng);
    let cfg = GrpoConfig {
        group_size: g,
        beta_kl: 0.05,
        ..GrpoConfig::default()
    };
    let mut groups = Vec::new();
    for input in inputs {
        let mut members = Vec::new();
        let rewards: Vec<f64> = (0..g).map(|_| rng.next_f64()).collect();
        let adv = group_advantages(&rewards, cfg.eps_adv);
        for a in adv {
            let trace = model.sample(&old, input, rng);
            let ref_logprobs = model.logprobs(&reference, input, &trace.choices)?;
            members.push(GroupMember {
                trace,
                ref_logprobs,
                advantage: a,
            });
        }
        groups.push(RolloutGroup { input, members });
    }
    let analytic = grpo_evaluate(model, &params, &groups, &cfg, Exec::Sequential)?.gradient;
    let objective = |p: &[f64]| grpo_objective(model, p, &groups, &cfg).expect("shapes fixed above");
    Ok(finite_diff_check(objective, &analytic, &params, 1e-5))
}

fn small_catalog() -> Result<Catalog> {
    let cfg = WorldConfig {
        n_items: 16,
        ..WorldConfig::default()
    };
    gen_catalog(&cfg, 7)
}

/// Worst gradient error per policy over `instances` random problems.
pub fn gradient_suite(instances: usize, seed: u64) -> Result<[f64; 3]> {
    let catalog = small_catalog()?;
    let mut rng = Xoshiro256::from_seed(seed);
    let mut worst = [0.0f64; 3];
    for _ in 0..instances {
        let views: Vec<HistoryView> = (0..2)
            .map(|_| {
                let t = rng.range_inclusive(1, 3);
                HistoryView::new(&random_history(&catalog, t, &mut rng), &catalog)
            })
            .collect::<Result<_>>()?;
        worst[0] = worst[0].max(gradient_check_error(&ActionModel, &views, 2, &mut rng)?);
        worst[1] = worst[1].max(gradient_check_error(&RewriteModel, &views, 2, &mut rng)?);
        let mats: Vec<CandidateMatrix> = (0..2)
            .map(|_| {
                let mut m = [[0.0; N_REASONER_FEATURES]; N_CANDIDATES];
                for row in m.iter_mut() {
                    row[0] = 1.0;
                    for f in row.iter_mut().take(5).skip(1) {
                        *f = rng.next_f64() * 0.5;
                    }
                    row[5] = if rng.bernoulli(0.4) { 1.0 } else { 0.0 };
                }
                m
            })
            .collect();
        worst[2] = worst[2].max(gradient_check_error(&ReasonerModel, &mats, 2, &mut rng)?);
    }
    Ok(worst)
}

fn suite(name: &'static str, passed: bool, detail: String) -> SuiteResult {
    SuiteResult { name, passed, detail }
}

fn kernel_suite(rng: &mut Xoshiro256) -> SuiteResult {
    let mut ok = true;
    for _ in 0..200 {
        let rs: Vec<f64> = (0..8).map(|_| rng.below(5) as f64 * 0.25).collect();
        let a = group_advantages(&rs, 1e-4);
        let shifted: Vec<f64> = rs.iter().map(|r| r + 2.0).collect();
        ok &= a == group_advantages(&shifted, 1e-4);
        ok &= a.iter().sum::<f64>().abs() < 1e-9;
        let (lc, lr) = (-rng.uniform(0.01, 5.0), -rng.uniform(0.01, 5.0));
        ok &= kl_k3(lc, lr) >= 0.0 && kl_k3(lc, lc) == 0.0;
        let (ratio, adv) = (rng.uniform(0.1, 3.0), rng.uniform(-2.0, 2.0));
        ok &= clipped_term(ratio, adv, 0.2) <= ratio * adv;
    }
    ok &= group_advantages(&[0.7; 6], 1e-4).iter().all(|a| *a == 0.0);
    suite("grpo kernels", ok, "advantage, clip and KL invariants".into())
}

fn reward_suite() -> SuiteResult {
    let shape = LengthShape::default();
    let plateau = (0..=40).all(|i| length_reward(0.3 + 0.01 * i as f64, &shape) == 1.0);
    let mut monotone = true;
    let mut prev = length_reward(0.0, &shape);
    for i in 1..=300 {
        let r = length_reward(i as f64 * 0.001, &shape);
        monotone &= r >= prev;
        prev = r;
    }
    suite(
        "length reward",
        plateau && monotone,
        "plateau on [0.3, 0.7], nondecreasing ramp".into(),
    )
}

fn oracle_suite(rng: &mut Xoshiro256) -> SuiteResult {
    let ok = (0..2000).all(|_| {
        let s: Vec<f64> = (0..N_CANDIDATES).map(|_| rng.below(4) as f64).collect();
        let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let first = s.iter().position(|x| *x == max).unwrap();
        oracle_predict(&s) == first
    });
    suite("oracle argmax", ok, "ties go to the lowest index".into())
}

fn determinism_suite() -> Result<SuiteResult> {
    let cfg = WorldConfig {
        n_train_episodes: 40,
        n_eval_episodes: 10,
        ..WorldConfig::default()
    };
    let a = gen_dataset(&cfg, Exec::Parallel)?;
    let b = gen_dataset(&cfg, Exec::Sequential)?;
    let same = encode_episodes(&a.train) == encode_episodes(&b.train)
        && encode_episodes(&a.eval) == encode_episodes(&b.eval)
        && a.catalog.to_json() == b.catalog.to_json();
    Ok(suite(
        "determinism",
        same,
        "parallel and sequential generation agree byte for byte".into(),
    ))
}

/// Runs every suite.
pub fn run_all(seed: u64) -> Result<Vec<SuiteResult>> {
    let mut rng = Xoshiro256::from_seed(seed);
    let worst = gradient_suite(20, seed)?;
    let mut out = vec![suite(
        "gradients",
        worst.iter().all(|w| *w < 1e-4),
        format!(
            "max relative error action {:.2e}, rewrite {:.2e}, reasoner {:.2e}",
            worst[0], worst[1], worst[2]
        ),
    )];
    out.push(kernel_suite(&mut rng));
    out.push(reward_suite());
    out.push(oracle_suite(&mut rng));
    out.push(determinism_suite()?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for r in run_all(11).unwrap() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
