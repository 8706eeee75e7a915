use log::{debug, info};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::policy::PolicyModel;
use crate::rng::Xoshiro256;

use super::{adam_step, group_advantages, grpo_evaluate, AdamState, GroupMember, GrpoConfig, RolloutGroup};

pub const LOG_HEADER: [&str; 6] = [
    "iter",
    "mean_r_acc",
    "mean_r_len",
    "mean_ratio",
    "objective",
    "max_ratio_dev",
];

/// Scored rollout. `reward` drives the advantage; the rest is logged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutOutcome {
    pub reward: f64,
    pub r_acc: f64,
    pub r_len: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub iter: usize,
    pub mean_r_acc: f64,
    pub mean_r_len: f64,
    pub mean_ratio: f64,
    /// Surrogate at the start of the first inner epoch.
    pub objective: f64,
    /// Largest `|ratio - 1|` over all inner epochs; zero when there is one.
    pub max_ratio_dev: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(LOG_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.iter.to_string(),
                fmt_f(r.mean_r_acc),
                fmt_f(r.mean_r_len),
                fmt_f(r.mean_ratio),
                fmt_f(r.objective),
                fmt_f(r.max_ratio_dev),
            ])
            .map_err(csv_err)?;
        }
        w.into_inner()
            .map_err(|e| Error::Internal(format!("csv flush: {e}")))
    }

    /// Mean `r_acc` over the last `n` iterations.
    pub fn tail_mean_r_acc(&self, n: usize) -> Option<f64> {
        let k = n.min(self.rows.len());
        (k > 0).then(|| self.rows[self.rows.len() - k..].iter().map(|r| r.mean_r_acc).sum::<f64>() / k as f64)
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.6}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Internal(format!("csv: {e}"))
}

/// Runs the GRPO loop over `inputs`, cycling through them `batch_episodes` at
/// a time. Rollout `b` of iteration `k` draws from stream
/// `(seed, purpose, k * batch + b)`, so results are independent of `exec`.
///
/// `score(input_index, choices)` rates one sampled trajectory.
#[allow(clippy::too_many_arguments)]
pub fn run_grpo<M, S>(
    model: &M,
    inputs: &[M::Input],
    score: S,
    initial: Vec<f64>,
    cfg: &GrpoConfig,
    seed: u64,
    purpose: u64,
    exec: Exec,
) -> Result<(Vec<f64>, TrainingLog)>
where
    M: PolicyModel,
    S: Fn(usize, &[u8]) -> Result<RolloutOutcome> + Sync,
{
    cfg.validate()?;
    if initial.len() != model.n_params() {
        return Err(Error::Shape(format!(
            "initial params: expected {}, got {}",
            model.n_params(),
            initial.len()
        )));
    }
    if inputs.is_empty() && cfg.iterations > 0 {
        return Err(Error::Validation(vec!["no training episodes".into()]));
    }
    let mut params = initial;
    let mut reference = params.clone();
    let mut adam = AdamState::new(params.len());
    let mut log = TrainingLog::default();
    let batch = cfg.batch_episodes;

    for iter in 0..cfg.iterations {
        if cfg.ref_refresh_every > 0 && iter > 0 && iter % cfg.ref_refresh_every == 0 {
            reference.clone_from(&params);
        }
        let old = params.clone();
        let rolled = exec.try_map_range(batch, |b| {
            let slot = iter * batch + b;
            let idx = slot % inputs.len();
            let input = &inputs[idx];
            let mut rng = Xoshiro256::stream(seed, purpose, slot as u64);
            let mut traces = Vec::with_capacity(cfg.group_size);
            let mut outcomes = Vec::with_capacity(cfg.group_size);
            for _ in 0..cfg.group_size {
                let trace = model.sample(&old, input, &mut rng);
                outcomes.push(score(idx, &trace.choices)?);
                traces.push(trace);
            }
            let rewards: Vec<f64> = outcomes.iter().map(|o| o.reward).collect();
            let adv = group_advantages(&rewards, cfg.eps_adv);
            let mut members = Vec::with_capacity(traces.len());
            for (trace, a) in traces.into_iter().zip(adv) {
                let ref_logprobs = model.logprobs(&reference, input, &trace.choices)?;
                members.push(GroupMember {
                    trace,
                    ref_logprobs,
                    advantage: a,
                });
            }
            Ok::<_, Error>((RolloutGroup { input, members }, outcomes))
        })?;

        let n_roll = (batch * cfg.group_size) as f64;
        let (mut acc, mut len, mut ratio) = (0.0, 0.0, 0.0);
        for (_, outs) in &rolled {
            for o in outs {
                acc += o.r_acc;
                len += o.r_len;
                ratio += o.ratio;
            }
        }
        let groups: Vec<RolloutGroup<'_, M::Input>> = rolled.into_iter().map(|(g, _)| g).collect();

        let mut objective = f64::NAN;
        let mut max_dev: f64 = 0.0;
        for epoch in 0..cfg.inner_epochs {
            let ev = grpo_evaluate(model, &params, &groups, cfg, exec)?;
            if !ev.objective.is_finite() || ev.gradient.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "objective at iteration {iter}, epoch {epoch}"
                )));
            }
            if epoch == 0 {
                objective = ev.objective;
            }
            max_dev = max_dev.max(ev.max_ratio_dev);
            adam_step(&mut adam, &mut params, &ev.gradient, cfg.lr)?;
        }
        let row = LogRow {
            iter,
            mean_r_acc: acc / n_roll,
            mean_r_len: len / n_roll,
            mean_ratio: ratio / n_roll,
            objective,
            max_ratio_dev: max_dev,
        };
        debug!(
            "iter {iter}: r_acc {:.4} r_len {:.4} ratio {:.3} J {:.5}",
            row.mean_r_acc, row.mean_r_len, row.mean_ratio, row.objective
        );
        log.rows.push(row);
    }
    if let Some(last) = log.rows.last() {
        info!(
            "grpo finished {} iterations, final r_acc {:.4}, ratio {:.3}",
            log.rows.len(),
            last.mean_r_acc,
            last.mean_ratio
        );
    }
    Ok((params, log))
}
