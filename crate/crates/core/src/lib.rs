//! Learnable verbalization of interaction histories for a recommendation
//! reasoner, trained with group-relative policy optimization on a synthetic
//! streaming world.
//!
//! The pipeline has two stages. Stage 1 trains a verbalizer policy (keep /
//! enrich actions or a segment-level rewrite) against a fixed oracle
//! reasoner. Stage 2 freezes the verbalizer and trains a small reasoner on
//! its contexts. [`eval`] runs the full ablation matrix and writes reports.

pub mod cli;
pub mod config;
pub mod domain;
pub mod error;
pub mod eval;
pub mod fsio;
pub mod grpo;
pub mod oracle;
pub mod par;
pub mod params_io;
pub mod policy;
pub mod reasoner;
pub mod rng;
pub mod selfcheck;
pub mod synthworld;
pub mod verbalizer;

pub use error::{Error, Result};
