//! The single JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::VariantName;
use crate::fsio::read_string;
use crate::grpo::GrpoConfig;
use crate::oracle::{OracleWeights, RewardConfig};
use crate::reasoner::ReasonerConfig;
use crate::synthworld::WorldConfig;
use crate::verbalizer::VerbalizerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub seeds: Vec<u64>,
    /// Variants to evaluate, in report order.
    pub variants: Vec<VariantName>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        AblateConfig {
            seeds: vec![1, 2, 3, 4, 5],
            variants: VariantName::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Directory holding `catalog.json`, `train.jsonl`, `eval.jsonl`.
    pub data_dir: PathBuf,
    /// Default output directory when `--out` is absent.
    pub out_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub world: WorldConfig,
    pub verbalizer: VerbalizerConfig,
    pub oracle: OracleWeights,
    pub reward: RewardConfig,
    pub grpo_stage1: GrpoConfig,
    pub grpo_stage2: GrpoConfig,
    pub reasoner: ReasonerConfig,
    pub ablate: AblateConfig,
    pub paths: PathsConfig,
    /// Reductions always run in index order, so this only documents intent;
    /// `false` is accepted and behaves identically.
    pub determinism: bool,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        GlobalConfig {
            world: WorldConfig::default(),
            verbalizer: VerbalizerConfig::default(),
            oracle: OracleWeights::default(),
            reward: RewardConfig::default(),
            grpo_stage1: GrpoConfig::default(),
            grpo_stage2: GrpoConfig::default(),
            reasoner: ReasonerConfig::default(),
            ablate: AblateConfig::default(),
            paths: PathsConfig::default(),
            determinism: true,
        }
    }
}

impl GlobalConfig {
    pub fn from_json(text: &str) -> Result<GlobalConfig> {
        let cfg: GlobalConfig = serde_json::from_str(text).map_err(Error::from_json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<GlobalConfig> {
        Self::from_json(&read_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Collects every section's problems into one validation error.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut check = |section: &str, r: Result<()>| {
            if let Err(e) = r {
                problems.push(format!("{section}: {e}"));
            }
        };
        check("world", self.world.validate());
        check("verbalizer", self.verbalizer.validate());
        check("oracle", self.oracle.validate());
        check("reward", self.reward.validate());
        check("grpo_stage1", self.grpo_stage1.validate());
        check("grpo_stage2", self.grpo_stage2.validate());
        check("reasoner", self.reasoner.validate());
        if self.ablate.seeds.is_empty() {
            problems.push("ablate: seeds must not be empty".into());
        }
        if self.ablate.variants.is_empty() {
            problems.push("ablate: variants must not be empty".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}
