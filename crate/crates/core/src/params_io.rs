//! Named-array JSON files for trained parameters.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio::{read_string, write_atomic};
use crate::reasoner::N_REASONER_FEATURES;
use crate::verbalizer::{PolicyKind, N_FEATURES, N_PREF_FEATURES, N_SEGMENT_CHOICES};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamsKind {
    Action,
    Rewrite,
    Reasoner,
}

impl From<PolicyKind> for ParamsKind {
    fn from(k: PolicyKind) -> Self {
        match k {
            PolicyKind::Action => ParamsKind::Action,
            PolicyKind::Rewrite => ParamsKind::Rewrite,
        }
    }
}

impl ParamsKind {
    /// Array names and lengths in flat-layout order.
    pub fn layout(self) -> Vec<(&'static str, usize)> {
        match self {
            ParamsKind::Action => vec![("keep_weights", N_FEATURES), ("enrich_weights", N_FEATURES)],
            ParamsKind::Rewrite => {
                const NAMES: [&str; N_SEGMENT_CHOICES] =
                    ["drop_weights", "keep_weights", "keep_enrich_weights", "merge_prev_weights"];
                let mut v: Vec<_> = NAMES.iter().map(|n| (*n, N_FEATURES)).collect();
                v.push(("pref_weights", N_PREF_FEATURES));
                v
            }
            ParamsKind::Reasoner => vec![("weights", N_REASONER_FEATURES)],
        }
    }

    pub fn policy(self) -> Option<PolicyKind> {
        match self {
            ParamsKind::Action => Some(PolicyKind::Action),
            ParamsKind::Rewrite => Some(PolicyKind::Rewrite),
            ParamsKind::Reasoner => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    format_version: u32,
    kind: ParamsKind,
    arrays: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedParams {
    pub kind: ParamsKind,
    pub flat: Vec<f64>,
}

pub fn params_to_json(kind: ParamsKind, flat: &[f64]) -> Result<String> {
    let layout = kind.layout();
    let total: usize = layout.iter().map(|(_, n)| n).sum();
    if flat.len() != total {
        return Err(Error::Shape(format!("{kind:?} params: expected {total}, got {}", flat.len())));
    }
    if flat.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("{kind:?} params")));
    }
    let mut arrays = BTreeMap::new();
    let mut at = 0;
    for (name, n) in layout {
        arrays.insert(name.to_string(), flat[at..at + n].to_vec());
        at += n;
    }
    let file = ParamsFile {
        format_version: FORMAT_VERSION,
        kind,
        arrays,
    };
    let mut s = serde_json::to_string_pretty(&file).map_err(Error::from_json)?;
    s.push('\n');
    Ok(s)
}

pub fn params_from_json(text: &str) -> Result<SavedParams> {
    let file: ParamsFile = serde_json::from_str(text).map_err(Error::from_json)?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Validation(vec![format!(
            "unsupported params format_version {}",
            file.format_version
        )]));
    }
    let layout = file.kind.layout();
    let mut problems = Vec::new();
    let mut flat = Vec::new();
    for (name, n) in &layout {
        match file.arrays.get(*name) {
            Some(a) if a.len() == *n => flat.extend_from_slice(a),
            Some(a) => problems.push(format!("{name}: expected {n} values, got {}", a.len())),
            None => problems.push(format!("missing array {name}")),
        }
    }
    for k in file.arrays.keys() {
        if !layout.iter().any(|(n, _)| n == k) {
            problems.push(format!("unknown array {k}"));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    Ok(SavedParams {
        kind: file.kind,
        flat,
    })
}

pub fn save_params(path: &Path, kind: ParamsKind, flat: &[f64]) -> Result<()> {
    write_atomic(path, params_to_json(kind, flat)?.as_bytes())
}

pub fn load_params(path: &Path) -> Result<SavedParams> {
    params_from_json(&read_string(path)?)
}
