use crate::error::{Error, Result};
use crate::par::Exec;
use crate::policy::{PolicyModel, Trace};

use super::{clipped_term, kl_k3, GrpoConfig};

/// One rollout with everything the surrogate needs besides current params.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMember {
    /// Choices plus log-probabilities under the sampling (old) policy.
    pub trace: Trace,
    /// Log-probabilities of the same choices under the KL reference policy.
    pub ref_logprobs: Vec<f64>,
    pub advantage: f64,
}

/// The G rollouts of one episode.
#[derive(Debug, Clone)]
pub struct RolloutGroup<'a, I> {
    pub input: &'a I,
    pub members: Vec<GroupMember>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub objective: f64,
    pub gradient: Vec<f64>,
    /// Largest `|ratio - 1|` over all tokens.
    pub max_ratio_dev: f64,
}

struct GroupEval {
    value: f64,
    grad: Vec<f64>,
    max_dev: f64,
}

fn eval_group<M: PolicyModel>(
    model: &M,
    params: &[f64],
    group: &RolloutGroup<'_, M::Input>,
    cfg: &GrpoConfig,
    with_grad: bool,
) -> Result<GroupEval> {
    let g = group.members.len() as f64;
    let mut value = 0.0;
    let mut max_dev: f64 = 0.0;
    let mut grad = vec![0.0; if with_grad { model.n_params() } else { 0 }];
    for m in &group.members {
        let n_tok = m.trace.len();
        if n_tok == 0 {
            continue;
        }
        if m.ref_logprobs.len() != n_tok {
            return Err(Error::Shape(format!(
                "reference logprobs: expected {n_tok}, got {}",
                m.ref_logprobs.len()
            )));
        }
        let current = model.logprobs(params, group.input, &m.trace.choices)?;
        let scale = 1.0 / (g * n_tok as f64);
        let mut coeffs = Vec::with_capacity(if with_grad { n_tok } else { 0 });
        let mut sum = 0.0;
        for t in 0..n_tok {
            let ratio = (current[t] - m.trace.logprobs[t]).exp();
            max_dev = max_dev.max((ratio - 1.0).abs());
            let surrogate = clipped_term(ratio, m.advantage, cfg.eps_clip);
            sum += surrogate - cfg.beta_kl * kl_k3(current[t], m.ref_logprobs[t]);
            if with_grad {
                // d/dlogp of the min: the unclipped branch carries ratio * adv, the clipped one is flat
                let unclipped = ratio * m.advantage;
                let d_surr = if unclipped <= surrogate { unclipped } else { 0.0 };
                let u = (m.ref_logprobs[t] - current[t]).exp();
                coeffs.push(scale * (d_surr + cfg.beta_kl * (u - 1.0)));
            }
        }
        value += sum * scale;
        if with_grad {
            model.accumulate_grad(params, group.input, &m.trace.choices, &coeffs, &mut grad)?;
        }
    }
    Ok(GroupEval {
        value,
        grad,
        max_dev,
    })
}

/// Batch surrogate, its gradient and ratio diagnostics. Groups are reduced in
/// index order, so the result does not depend on `exec`.
pub fn grpo_evaluate<M: PolicyModel>(
    model: &M,
    params: &[f64],
    groups: &[RolloutGroup<'_, M::Input>],
    cfg: &GrpoConfig,
    exec: Exec,
) -> Result<ObjectiveEval>
where
    M::Input: Sync,
{
    if params.len() != model.n_params() {
        return Err(Error::Shape(format!(
            "params: expected {}, got {}",
            model.n_params(),
            params.len()
        )));
    }
    let per_group =
        exec.try_map_range(groups.len(), |i| eval_group(model, params, &groups[i], cfg, true))?;
    let n = groups.len().max(1) as f64;
    let mut out = ObjectiveEval {
        objective: 0.0,
        gradient: vec![0.0; model.n_params()],
        max_ratio_dev: 0.0,
    };
    for ge in per_group {
        out.objective += ge.value / n;
        for (o, g) in out.gradient.iter_mut().zip(&ge.grad) {
            *o += g / n;
        }
        out.max_ratio_dev = out.max_ratio_dev.max(ge.max_dev);
    }
    Ok(out)
}

/// Mean over episodes of the per-group clipped surrogate minus the KL penalty.
pub fn grpo_objective<M: PolicyModel>(
    model: &M,
    params: &[f64],
    groups: &[RolloutGroup<'_, M::Input>],
    cfg: &GrpoConfig,
) -> Result<f64> {
    let n = groups.len().max(1) as f64;
    let mut total = 0.0;
    for g in groups {
        total += eval_group(model, params, g, cfg, false)?.value / n;
    }
    Ok(total)
}

pub fn grpo_gradient<M: PolicyModel>(
    model: &M,
    params: &[f64],
    groups: &[RolloutGroup<'_, M::Input>],
    cfg: &GrpoConfig,
) -> Result<Vec<f64>> {
    Ok(grpo_evaluate(model, params, groups, cfg, Exec::Sequential)?.gradient)
}
