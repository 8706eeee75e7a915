//! Deterministic random streams.
//!
//! Every random decision in the crate is drawn from a xoshiro256** generator
//! seeded through splitmix64. Streams are addressed by `(seed, purpose, index)`
//! so that work items can be generated in any order, or concurrently, without
//! changing their output.

use std::f64::consts::PI;

/// Stream purposes. Values are part of the reproducibility contract.
pub mod purpose {
    pub const CATALOG: u64 = 1;
    pub const TRAIN_EPISODE: u64 = 2;
    pub const EVAL_EPISODE: u64 = 3;
    pub const INIT_PARAMS: u64 = 4;
    pub const STAGE1_ROLLOUT: u64 = 5;
    pub const STAGE2_ROLLOUT: u64 = 6;
    pub const SEED_DERIVE: u64 = 7;
}

#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

/// xoshiro256** 1.0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Xoshiro256 {
    s: [u64; 4],
}

impl Xoshiro256 {
    pub fn from_seed(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        let s = [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()];
        Xoshiro256 { s }
    }

    /// Independent substream for `(seed, purpose, index)`.
    pub fn stream(seed: u64, purpose: u64, index: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        let a = sm.next_u64();
        let mut sm = SplitMix64::new(a ^ purpose.wrapping_mul(0xd6e8_feb8_6659_fd93));
        let b = sm.next_u64();
        let mut sm = SplitMix64::new(b ^ index.wrapping_mul(0xa076_1d64_78bd_642f));
        Self::from_seed(sm.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Uniform integer in [0, n). Lemire's multiply-shift with rejection.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    /// Uniform integer in [lo, hi].
    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.below(hi - lo + 1)
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }

    /// Index drawn proportionally to nonnegative `weights`.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut u = self.next_f64() * total;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                return i;
            }
            u -= w;
        }
        // rounding: fall back to the last positive weight
        weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }

    pub fn standard_normal(&mut self) -> f64 {
        // Box-Muller; 1 - u keeps the log argument in (0, 1]
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    /// Gamma(shape, 1) by Marsaglia-Tsang rejection, with the
    /// `U^(1/shape)` boost for shape < 1.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        assert!(shape > 0.0, "gamma shape must be positive");
        if shape < 1.0 {
            let g = self.gamma(shape + 1.0);
            let u = 1.0 - self.next_f64();
            return g * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.standard_normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.next_f64();
            if u < 1.0 - 0.0331 * x.powi(4) {
                return d * v;
            }
            if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// Symmetric Dirichlet over `k` coordinates.
    pub fn dirichlet(&mut self, alpha: f64, k: usize) -> Vec<f64> {
        loop {
            let g: Vec<f64> = (0..k).map(|_| self.gamma(alpha)).collect();
            let total: f64 = g.iter().sum();
            if total > 0.0 && total.is_finite() {
                return g.into_iter().map(|x| x / total).collect();
            }
        }
    }
}
