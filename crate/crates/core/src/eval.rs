//! Recall@1 metrics, the ablation matrix over variants and seeds, and the
//! CSV/Markdown report.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use crate::config::GlobalConfig;
use crate::domain::{Catalog, EpisodeInstance};
use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::grpo::{train_stage1, Stage1Setup, TrainingLog};
use crate::oracle::{oracle_predict, oracle_scores, AccuracySignal, OracleWeights, RewardConfig};
use crate::par::Exec;
use crate::reasoner::{candidate_matrix, init_reasoner, reasoner_predict, train_stage2};
use crate::rng::{purpose, Xoshiro256};
use crate::synthworld::{gen_dataset, Dataset};
use crate::verbalizer::{init_params, PolicyKind, Verbalizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    Template,
    ZeroShot,
    Action,
    Rewrite,
    RewriteTrainedReasoner,
    RawTrainedReasoner,
    RewriteRankingReward,
}

impl VariantName {
    pub const ALL: [VariantName; 7] = [
        VariantName::Template,
        VariantName::ZeroShot,
        VariantName::Action,
        VariantName::Rewrite,
        VariantName::RewriteTrainedReasoner,
        VariantName::RawTrainedReasoner,
        VariantName::RewriteRankingReward,
    ];

    pub fn label(self) -> &'static str {
        match self {
            VariantName::Template => "template",
            VariantName::ZeroShot => "zero_shot",
            VariantName::Action => "action",
            VariantName::Rewrite => "rewrite",
            VariantName::RewriteTrainedReasoner => "rewrite_trained_reasoner",
            VariantName::RawTrainedReasoner => "raw_trained_reasoner",
            VariantName::RewriteRankingReward => "rewrite_ranking_reward",
        }
    }

    fn display_name(self) -> &'static str {
        match self {
            VariantName::Template => "Template baseline",
            VariantName::ZeroShot => "Zero-shot rewrite",
            VariantName::Action => "Action verbalizer",
            VariantName::Rewrite => "Rewrite verbalizer",
            VariantName::RewriteTrainedReasoner => "Rewrite + trained reasoner",
            VariantName::RawTrainedReasoner => "Raw interactions + trained reasoner",
            VariantName::RewriteRankingReward => "Rewrite, ranking reward",
        }
    }
}

impl fmt::Display for VariantName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for VariantName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VariantName::ALL
            .into_iter()
            .find(|v| v.label() == s)
            .ok_or_else(|| Error::Validation(vec![format!("unknown variant `{s}`")]))
    }
}

/// Who picks the candidate.
#[derive(Debug, Clone, PartialEq)]
pub enum ReasonerChoice {
    Oracle(OracleWeights),
    Trained(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub recall1_overall: f64,
    /// `None` when the evaluation set has no discovery episodes.
    pub recall1_discovery: Option<f64>,
    pub n_eval: usize,
    pub n_discovery: usize,
    pub mean_compression: f64,
}

/// Aggregates per-episode hits. `compression` may be empty.
pub fn metrics_from_predictions(
    predictions: &[usize],
    targets: &[usize],
    discovery: &[bool],
    compression: &[f64],
) -> Result<Metrics> {
    if predictions.len() != targets.len() || targets.len() != discovery.len() {
        return Err(Error::Shape(format!(
            "predictions {}, targets {}, discovery flags {}",
            predictions.len(),
            targets.len(),
            discovery.len()
        )));
    }
    let n = predictions.len();
    let mut hits = 0usize;
    let mut disc_hits = 0usize;
    let mut n_disc = 0usize;
    for i in 0..n {
        let hit = predictions[i] == targets[i];
        hits += hit as usize;
        if discovery[i] {
            n_disc += 1;
            disc_hits += hit as usize;
        }
    }
    Ok(Metrics {
        recall1_overall: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
        recall1_discovery: (n_disc > 0).then(|| disc_hits as f64 / n_disc as f64),
        n_eval: n,
        n_discovery: n_disc,
        mean_compression: if compression.is_empty() {
            0.0
        } else {
            compression.iter().sum::<f64>() / compression.len() as f64
        },
    })
}

/// Verbalizes every episode greedily and scores the reasoner's top pick.
pub fn evaluate(
    verbalizer: &Verbalizer,
    reasoner: &ReasonerChoice,
    episodes: &[EpisodeInstance],
    catalog: &Catalog,
    exec: Exec,
) -> Result<Metrics> {
    let per_episode = exec.try_map_range(episodes.len(), |i| {
        let ep = &episodes[i];
        let ctx = verbalizer.verbalize(&ep.history, catalog)?;
        let pred = match reasoner {
            ReasonerChoice::Oracle(w) => oracle_predict(&oracle_scores(&ctx, &ep.candidates, catalog, w)?),
            ReasonerChoice::Trained(p) => reasoner_predict(p, &candidate_matrix(&ctx, ep, catalog)?),
        };
        Ok::<_, Error>((pred, ctx.compression_ratio()))
    })?;
    let preds: Vec<usize> = per_episode.iter().map(|p| p.0).collect();
    let ratios: Vec<f64> = per_episode.iter().map(|p| p.1).collect();
    let targets: Vec<usize> = episodes.iter().map(|e| e.target_index).collect();
    let disc: Vec<bool> = episodes.iter().map(|e| e.is_discovery).collect();
    metrics_from_predictions(&preds, &targets, &disc, &ratios)
}

/// Trained parameters and logs for one seed.
#[derive(Debug, Clone, Default)]
pub struct SeedArtifacts {
    pub action: Option<(Vec<f64>, TrainingLog)>,
    pub rewrite: Option<(Vec<f64>, TrainingLog)>,
    pub rewrite_ranking: Option<(Vec<f64>, TrainingLog)>,
    pub reasoner_on_rewrite: Option<(Vec<f64>, TrainingLog)>,
    pub reasoner_on_raw: Option<(Vec<f64>, TrainingLog)>,
}

/// Independent training seed for one component of one experiment seed.
pub fn component_seed(seed: u64, component: u64) -> u64 {
    Xoshiro256::stream(seed, purpose::SEED_DERIVE, component).next_u64()
}

const COMPONENT_ACTION: u64 = 1;
const COMPONENT_REWRITE: u64 = 2;
const COMPONENT_RANKING: u64 = 3;
const COMPONENT_REASONER_REWRITE: u64 = 4;
const COMPONENT_REASONER_RAW: u64 = 5;

/// Stage-1 training of `kind` from its seeded initialization.
pub fn train_verbalizer(
    cfg: &GlobalConfig,
    dataset: &Dataset,
    kind: PolicyKind,
    reward: &RewardConfig,
    seed: u64,
    exec: Exec,
) -> Result<(Vec<f64>, TrainingLog)> {
    let mut rng = Xoshiro256::stream(seed, purpose::INIT_PARAMS, 0);
    let init = init_params(kind.n_params(), cfg.verbalizer.init_scale, &mut rng);
    let setup = Stage1Setup {
        catalog: &dataset.catalog,
        grpo: &cfg.grpo_stage1,
        reward,
        oracle: &cfg.oracle,
    };
    train_stage1(&dataset.train, kind, setup, init, seed, exec)
}

/// Stage-2 training of the reasoner on the frozen `verbalizer`.
pub fn train_reasoner(
    cfg: &GlobalConfig,
    dataset: &Dataset,
    verbalizer: &Verbalizer,
    seed: u64,
    exec: Exec,
) -> Result<(Vec<f64>, TrainingLog)> {
    let init = init_reasoner(&cfg.reasoner, seed);
    train_stage2(&dataset.train, &dataset.catalog, verbalizer, init, &cfg.grpo_stage2, seed, exec)
}

/// The world configuration for experiment seed `seed`.
pub fn world_for_seed(cfg: &GlobalConfig, seed: u64) -> crate::synthworld::WorldConfig {
    let mut w = cfg.world.clone();
    w.master_seed = seed;
    w
}

/// Trains everything the requested variants need.
pub fn train_seed(cfg: &GlobalConfig, dataset: &Dataset, seed: u64, exec: Exec) -> Result<SeedArtifacts> {
    let wants = |v: VariantName| cfg.ablate.variants.contains(&v);
    let mut art = SeedArtifacts::default();
    if wants(VariantName::Action) {
        info!("seed {seed}: training action verbalizer");
        art.action = Some(train_verbalizer(
            cfg,
            dataset,
            PolicyKind::Action,
            &cfg.reward,
            component_seed(seed, COMPONENT_ACTION),
            exec,
        )?);
    }
    if wants(VariantName::Rewrite) || wants(VariantName::RewriteTrainedReasoner) {
        info!("seed {seed}: training rewrite verbalizer");
        art.rewrite = Some(train_verbalizer(
            cfg,
            dataset,
            PolicyKind::Rewrite,
            &cfg.reward,
            component_seed(seed, COMPONENT_REWRITE),
            exec,
        )?);
    }
    if wants(VariantName::RewriteRankingReward) {
        info!("seed {seed}: training rewrite verbalizer with ranking reward");
        let ranking = RewardConfig {
            signal: AccuracySignal::Ranking,
            ..cfg.reward.clone()
        };
        art.rewrite_ranking = Some(train_verbalizer(
            cfg,
            dataset,
            PolicyKind::Rewrite,
            &ranking,
            component_seed(seed, COMPONENT_RANKING),
            exec,
        )?);
    }
    if wants(VariantName::RewriteTrainedReasoner) {
        info!("seed {seed}: training reasoner on rewrite contexts");
        let (p, _) = art.rewrite.as_ref().expect("rewrite trained above");
        let v = Verbalizer::learned(PolicyKind::Rewrite, p)?;
        art.reasoner_on_rewrite = Some(train_reasoner(
            cfg,
            dataset,
            &v,
            component_seed(seed, COMPONENT_REASONER_REWRITE),
            exec,
        )?);
    }
    if wants(VariantName::RawTrainedReasoner) {
        info!("seed {seed}: training reasoner on template contexts");
        art.reasoner_on_raw = Some(train_reasoner(
            cfg,
            dataset,
            &Verbalizer::Template,
            component_seed(seed, COMPONENT_REASONER_RAW),
            exec,
        )?);
    }
    Ok(art)
}

fn trained<'a>(slot: &'a Option<(Vec<f64>, TrainingLog)>, what: &str) -> Result<&'a [f64]> {
    slot.as_ref()
        .map(|(p, _)| p.as_slice())
        .ok_or_else(|| Error::Internal(format!("{what} parameters were not trained")))
}

/// Verbalizer and reasoner for `variant` given a seed's artifacts.
pub fn variant_setup(
    variant: VariantName,
    cfg: &GlobalConfig,
    art: &SeedArtifacts,
) -> Result<(Verbalizer, ReasonerChoice)> {
    let oracle = ReasonerChoice::Oracle(cfg.oracle.clone());
    Ok(match variant {
        VariantName::Template => (Verbalizer::Template, oracle),
        VariantName::ZeroShot => (Verbalizer::Heuristic(cfg.verbalizer.heuristic.clone()), oracle),
        VariantName::Action => (
            Verbalizer::learned(PolicyKind::Action, trained(&art.action, "action")?)?,
            oracle,
        ),
        VariantName::Rewrite => (
            Verbalizer::learned(PolicyKind::Rewrite, trained(&art.rewrite, "rewrite")?)?,
            oracle,
        ),
        VariantName::RewriteTrainedReasoner => (
            Verbalizer::learned(PolicyKind::Rewrite, trained(&art.rewrite, "rewrite")?)?,
            ReasonerChoice::Trained(trained(&art.reasoner_on_rewrite, "reasoner")?.to_vec()),
        ),
        VariantName::RawTrainedReasoner => (
            Verbalizer::Template,
            ReasonerChoice::Trained(trained(&art.reasoner_on_raw, "raw reasoner")?.to_vec()),
        ),
        VariantName::RewriteRankingReward => (
            Verbalizer::learned(PolicyKind::Rewrite, trained(&art.rewrite_ranking, "ranking rewrite")?)?,
            oracle,
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedLabel {
    Seed(u64),
    Mean,
}

impl fmt::Display for SeedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedLabel::Seed(s) => write!(f, "{s}"),
            SeedLabel::Mean => f.write_str("mean"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub variant: VariantName,
    pub seed: SeedLabel,
    pub recall1_overall: f64,
    pub recall1_discovery: Option<f64>,
    pub rel_improvement_pct: Option<f64>,
    pub mean_compression: f64,
}

/// `100 * (v - t) / t`; the template row itself is 0, a zero baseline gives
/// `+inf` (or 0 when `v` is also 0).
pub fn relative_improvement(v: Option<f64>, template: Option<f64>) -> Option<f64> {
    let (v, t) = (v?, template?);
    if t == 0.0 {
        Some(if v == 0.0 { 0.0 } else { f64::INFINITY * v.signum() })
    } else {
        Some(100.0 * (v - t) / t)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
}

impl ReportTable {
    pub fn mean_row(&self, variant: VariantName) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.seed == SeedLabel::Mean)
    }

    pub fn seed_rows(&self, variant: VariantName) -> impl Iterator<Item = &ReportRow> {
        self.rows
            .iter()
            .filter(move |r| r.variant == variant && r.seed != SeedLabel::Mean)
    }
}

/// Builds per-seed rows with relative improvement against that seed's
/// template, then one mean row per variant.
pub fn build_table(per_seed: &[(u64, Vec<(VariantName, Metrics)>)], variants: &[VariantName]) -> ReportTable {
    let mut rows = Vec::new();
    for (seed, ms) in per_seed {
        let template = ms
            .iter()
            .find(|(v, _)| *v == VariantName::Template)
            .and_then(|(_, m)| m.recall1_discovery);
        for (v, m) in ms {
            rows.push(ReportRow {
                variant: *v,
                seed: SeedLabel::Seed(*seed),
                recall1_overall: m.recall1_overall,
                recall1_discovery: m.recall1_discovery,
                rel_improvement_pct: if *v == VariantName::Template {
                    m.recall1_discovery.map(|_| 0.0)
                } else {
                    relative_improvement(m.recall1_discovery, template)
                },
                mean_compression: m.mean_compression,
            });
        }
    }
    let mean_of = |v: VariantName| -> Option<(f64, Option<f64>, f64)> {
        let sel: Vec<&ReportRow> = rows.iter().filter(|r| r.variant == v).collect();
        if sel.is_empty() {
            return None;
        }
        let n = sel.len() as f64;
        let overall = sel.iter().map(|r| r.recall1_overall).sum::<f64>() / n;
        let disc = sel
            .iter()
            .map(|r| r.recall1_discovery)
            .sum::<Option<f64>>()
            .map(|s| s / n);
        let comp = sel.iter().map(|r| r.mean_compression).sum::<f64>() / n;
        Some((overall, disc, comp))
    };
    let template_mean = mean_of(VariantName::Template).and_then(|m| m.1);
    let mut means = Vec::new();
    for v in variants {
        if let Some((overall, disc, comp)) = mean_of(*v) {
            means.push(ReportRow {
                variant: *v,
                seed: SeedLabel::Mean,
                recall1_overall: overall,
                recall1_discovery: disc,
                rel_improvement_pct: if *v == VariantName::Template {
                    disc.map(|_| 0.0)
                } else {
                    relative_improvement(disc, template_mean)
                },
                mean_compression: comp,
            });
        }
    }
    rows.extend(means);
    ReportTable { rows }
}

/// Everything one ablation run produced.
#[derive(Debug, Clone)]
pub struct AblationRun {
    pub table: ReportTable,
    pub artifacts: Vec<(u64, SeedArtifacts)>,
}

/// Per seed: generate the world, train what the variants need, evaluate.
pub fn run_ablation(cfg: &GlobalConfig, exec: Exec) -> Result<AblationRun> {
    cfg.validate()?;
    let mut per_seed = Vec::new();
    let mut artifacts = Vec::new();
    for &seed in &cfg.ablate.seeds {
        let dataset = gen_dataset(&world_for_seed(cfg, seed), exec)?;
        let art = train_seed(cfg, &dataset, seed, exec)?;
        let ms = evaluate_seed(cfg, &dataset, &art, exec)?;
        per_seed.push((seed, ms));
        artifacts.push((seed, art));
    }
    Ok(AblationRun {
        table: build_table(&per_seed, &cfg.ablate.variants),
        artifacts,
    })
}

pub fn evaluate_seed(
    cfg: &GlobalConfig,
    dataset: &Dataset,
    art: &SeedArtifacts,
    exec: Exec,
) -> Result<Vec<(VariantName, Metrics)>> {
    let mut out = Vec::new();
    for &v in &cfg.ablate.variants {
        let (verb, reasoner) = variant_setup(v, cfg, art)?;
        let m = evaluate(&verb, &reasoner, &dataset.eval, &dataset.catalog, exec)?;
        info!(
            "{v}: recall@1 {:.4}, discovery {}",
            m.recall1_overall,
            fmt_opt(m.recall1_discovery)
        );
        out.push((v, m));
    }
    Ok(out)
}

pub const REPORT_HEADER: [&str; 6] = [
    "variant",
    "seed",
    "recall1_overall",
    "recall1_discovery",
    "rel_improvement_pct",
    "mean_compression",
];

/// Undefined values print as `NA`, unbounded improvements as `inf`.
fn fmt_opt(x: Option<f64>) -> String {
    match x {
        None => "NA".into(),
        Some(v) if v == f64::INFINITY => "inf".into(),
        Some(v) if v == f64::NEG_INFINITY => "-inf".into(),
        Some(v) => format!("{v:.6}"),
    }
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    match s {
        "NA" => Ok(None),
        "inf" => Ok(Some(f64::INFINITY)),
        "-inf" => Ok(Some(f64::NEG_INFINITY)),
        _ => s
            .parse()
            .map(Some)
            .map_err(|_| Error::Validation(vec![format!("bad number `{s}`")])),
    }
}

pub fn report_csv(table: &ReportTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Internal(format!("csv: {e}"));
    w.write_record(REPORT_HEADER).map_err(csv_err)?;
    for r in &table.rows {
        w.write_record([
            r.variant.label().to_string(),
            r.seed.to_string(),
            format!("{:.6}", r.recall1_overall),
            fmt_opt(r.recall1_discovery),
            fmt_opt(r.rel_improvement_pct),
            format!("{:.6}", r.mean_compression),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Internal(format!("csv flush: {e}")))
}

pub fn parse_report_csv(bytes: &[u8]) -> Result<ReportTable> {
    let mut rd = csv::Reader::from_reader(bytes);
    let header = rd
        .headers()
        .map_err(|e| Error::Validation(vec![format!("report header: {e}")]))?;
    if header.iter().collect::<Vec<_>>() != REPORT_HEADER {
        return Err(Error::Validation(vec!["report header mismatch".into()]));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Validation(vec![format!("report row: {e}")]))?;
        let num = |i: usize| -> Result<f64> {
            parse_opt(&rec[i])?.ok_or_else(|| Error::Validation(vec![format!("column {i} is NA")]))
        };
        rows.push(ReportRow {
            variant: rec[0].parse()?,
            seed: match &rec[1] {
                "mean" => SeedLabel::Mean,
                s => SeedLabel::Seed(
                    s.parse()
                        .map_err(|_| Error::Validation(vec![format!("bad seed `{s}`")]))?,
                ),
            },
            recall1_overall: num(2)?,
            recall1_discovery: parse_opt(&rec[3])?,
            rel_improvement_pct: parse_opt(&rec[4])?,
            mean_compression: num(5)?,
        });
    }
    Ok(ReportTable { rows })
}

pub fn report_markdown(table: &ReportTable) -> String {
    let mut s = String::from("# Verbalization ablation\n\n");
    s.push_str("Recall@1 on held-out episodes; relative improvement is on discovery recall against the template baseline.\n\n");
    s.push_str("| Variant | Seed | Recall@1 | Recall@1 discovery | Rel. improvement (%) | Compression |\n");
    s.push_str("|---|---|---|---|---|---|\n");
    let mut ordered: Vec<&ReportRow> = table.rows.iter().filter(|r| r.seed == SeedLabel::Mean).collect();
    ordered.extend(table.rows.iter().filter(|r| r.seed != SeedLabel::Mean));
    for r in ordered {
        s.push_str(&format!(
            "| {} | {} | {:.4} | {} | {} | {:.3} |\n",
            r.variant.display_name(),
            r.seed,
            r.recall1_overall,
            r.recall1_discovery.map_or("n/a".into(), |v| format!("{v:.4}")),
            match r.rel_improvement_pct {
                None => "n/a".to_string(),
                Some(v) if v.is_infinite() => "inf".into(),
                Some(v) => format!("{v:+.1}"),
            },
            r.mean_compression
        ));
    }
    s
}

/// Writes `report.csv` and `report.md` into `out_dir`.
pub fn emit_report(table: &ReportTable, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_atomic(&out_dir.join("report.csv"), &report_csv(table)?)?;
    write_atomic(&out_dir.join("report.md"), report_markdown(table).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recall_arithmetic() {
        let m = metrics_from_predictions(&[0, 1, 2], &[0, 1, 0], &[true, false, true], &[]).unwrap();
        assert!((m.recall1_overall - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.recall1_discovery, Some(0.5));
        assert_eq!(m.n_discovery, 2);
    }

    #[test]
    fn no_discovery_episodes_is_undefined() {
        let m = metrics_from_predictions(&[0], &[0], &[false], &[]).unwrap();
        assert_eq!(m.recall1_discovery, None);
        assert_eq!(relative_improvement(m.recall1_discovery, Some(0.3)), None);
    }

    #[test]
    fn relative_improvement_cases() {
        assert!((relative_improvement(Some(0.3), Some(0.2)).unwrap() - 50.0).abs() < 1e-9);
        assert_eq!(relative_improvement(Some(0.0), Some(0.0)), Some(0.0));
        assert_eq!(relative_improvement(Some(0.1), Some(0.0)), Some(f64::INFINITY));
    }

    fn metrics(disc: f64) -> Metrics {
        Metrics {
            recall1_overall: 0.5,
            recall1_discovery: Some(disc),
            n_eval: 10,
            n_discovery: 5,
            mean_compression: 1.0,
        }
    }

    #[test]
    fn table_has_one_mean_row_per_variant() {
        let vs = [VariantName::Template, VariantName::Rewrite];
        let per_seed = vec![
            (1, vec![(vs[0], metrics(0.2)), (vs[1], metrics(0.4))]),
            (2, vec![(vs[0], metrics(0.2)), (vs[1], metrics(0.2))]),
        ];
        let t = build_table(&per_seed, &vs);
        assert_eq!(t.rows.len(), 6);
        let mean = t.mean_row(VariantName::Rewrite).unwrap();
        assert!((mean.recall1_discovery.unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(t.mean_row(VariantName::Template).unwrap().rel_improvement_pct, Some(0.0));
        assert_eq!(t.seed_rows(VariantName::Rewrite).count(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let vs = [VariantName::Template, VariantName::ZeroShot];
        let per_seed = vec![(3, vec![(vs[0], metrics(0.0)), (vs[1], metrics(0.25))])];
        let t = build_table(&per_seed, &vs);
        let back = parse_report_csv(&report_csv(&t).unwrap()).unwrap();
        assert_eq!(back.rows.len(), t.rows.len());
        assert_eq!(back.rows[1].rel_improvement_pct, Some(f64::INFINITY));
        assert_eq!(back.rows[1].recall1_discovery, Some(0.25));
        assert_eq!(back.rows[2].seed, SeedLabel::Mean);
    }

    #[test]
    fn empty_table_is_header_only() {
        let bytes = report_csv(&ReportTable::default()).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap().trim(), REPORT_HEADER.join(","));
    }
}
