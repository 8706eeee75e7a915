//! Stochastic policies over discrete decision sequences with exact
//! log-probabilities and analytic score-function gradients.

use crate::error::{Error, Result};
use crate::rng::Xoshiro256;

/// Sampled decisions and their log-probabilities under the sampling policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub choices: Vec<u8>,
    pub logprobs: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }
}

/// A parametric policy over a flat parameter vector.
///
/// Every decision in a trajectory counts as one generated token.
pub trait PolicyModel: Sync {
    /// Per-episode observation the policy conditions on.
    type Input: Sync;

    fn n_params(&self) -> usize;

    /// Number of decisions a trajectory on `input` contains.
    fn n_decisions(&self, input: &Self::Input) -> usize;

    fn sample(&self, params: &[f64], input: &Self::Input, rng: &mut Xoshiro256) -> Trace;

    /// Most likely decision at every step, ties to the lowest choice.
    fn greedy(&self, params: &[f64], input: &Self::Input) -> Vec<u8>;

    fn logprobs(&self, params: &[f64], input: &Self::Input, choices: &[u8]) -> Result<Vec<f64>>;

    /// Adds `sum_t coeffs[t] * d logprob_t / d params` into `grad`.
    fn accumulate_grad(
        &self,
        params: &[f64],
        input: &Self::Input,
        choices: &[u8],
        coeffs: &[f64],
        grad: &mut [f64],
    ) -> Result<()>;
}

pub(crate) fn check_len(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape(format!("{what}: expected {expected}, got {got}")))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// log P(bit) for a Bernoulli with success logit `z`.
pub fn bernoulli_logprob(z: f64, bit: bool) -> f64 {
    if bit {
        -softplus(-z)
    } else {
        -softplus(z)
    }
}

/// Log-softmax over the entries where `allowed` is true; masked entries get -inf.
pub fn masked_log_softmax(logits: &[f64], allowed: &[bool], out: &mut [f64]) {
    let max = logits
        .iter()
        .zip(allowed)
        .filter(|(_, a)| **a)
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits
        .iter()
        .zip(allowed)
        .filter(|(_, a)| **a)
        .map(|(l, _)| (l - max).exp())
        .sum();
    let lse = max + sum.ln();
    for ((o, l), a) in out.iter_mut().zip(logits).zip(allowed) {
        *o = if *a { l - lse } else { f64::NEG_INFINITY };
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_logprobs_normalize() {
        for z in [-30.0, -2.0, 0.0, 0.7, 40.0] {
            let s = bernoulli_logprob(z, true).exp() + bernoulli_logprob(z, false).exp();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!((bernoulli_logprob(0.0, true) - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn masked_softmax_renormalizes() {
        let mut out = [0.0; 4];
        masked_log_softmax(&[0.0, 0.0, 0.0, 5.0], &[true, true, true, false], &mut out);
        for v in &out[..3] {
            assert!((v - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        }
        assert_eq!(out[3], f64::NEG_INFINITY);
    }
}
