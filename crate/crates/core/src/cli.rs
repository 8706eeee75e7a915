//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage or validation failure, 2 runtime fault.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::config::GlobalConfig;
use crate::error::{Error, Result};
use crate::eval::{
    component_seed, emit_report, evaluate, run_ablation, train_reasoner, train_verbalizer, world_for_seed,
    ReasonerChoice, SeedArtifacts,
};
use crate::fsio::{file_digest, write_atomic};
use crate::grpo::TrainingLog;
use crate::par::{configure_workers, Exec};
use crate::params_io::{load_params, save_params, ParamsKind};
use crate::reasoner::N_REASONER_FEATURES;
use crate::selfcheck;
use crate::synthworld::{gen_dataset, load_dataset, write_dataset, Dataset, CATALOG_FILE, EVAL_FILE, TRAIN_FILE};
use crate::verbalizer::{PolicyKind, Verbalizer};

#[derive(Debug, Parser)]
#[command(name = "verblab", version, about = "Learned history verbalization for next-item reranking")]
struct Cli {
    /// JSON configuration; defaults apply to absent keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides paths.out_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the world master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 runs sequentially, 0 picks the machine default.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate catalog.json, train.jsonl and eval.jsonl.
    GenData,
    /// Stage 1: train a verbalizer against the oracle reasoner.
    TrainVerbalizer {
        #[arg(long)]
        policy: PolicyKind,
        #[command(flatten)]
        data: DataArg,
    },
    /// Stage 2: train the reasoner on a frozen verbalizer's contexts.
    TrainReasoner {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        data: DataArg,
    },
    /// Print Recall@1 metrics for one verbalizer / reasoner pairing as JSON.
    Eval {
        #[command(flatten)]
        source: SourceArgs,
        /// Trained reasoner parameters; the oracle reasoner is used otherwise.
        #[arg(long)]
        reasoner: Option<PathBuf>,
        #[command(flatten)]
        data: DataArg,
    },
    /// Train and evaluate every configured variant and seed, then write the report.
    Ablate,
    /// Like ablate, and also keep every dataset, parameter file and log.
    Pipeline,
    /// Run the built-in invariant and gradient suites.
    Check,
}

#[derive(Debug, Args)]
struct DataArg {
    /// Dataset directory (overrides paths.data_dir).
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = false, multiple = false)]
struct SourceArgs {
    /// Learned verbalizer parameter file.
    #[arg(long)]
    verbalizer: Option<PathBuf>,
    /// Use the field-by-field template.
    #[arg(long)]
    raw: bool,
    /// Use the rule-based zero-shot rewrite.
    #[arg(long)]
    zero_shot: bool,
}

struct Ctx {
    cfg: GlobalConfig,
    out: PathBuf,
    seed: u64,
    /// Set by `--seed`; narrows ablation runs to that single seed.
    seed_override: Option<u64>,
    exec: Exec,
}

impl Ctx {
    fn data_dir(&self, arg: &DataArg) -> PathBuf {
        arg.data.clone().unwrap_or_else(|| self.cfg.paths.data_dir.clone())
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    run_with_output(argv, &mut lock)
}

pub fn run_with_output<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging();
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("VERBLAB_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn load_config(cli: &Cli) -> Result<GlobalConfig> {
    let mut cfg = match &cli.config {
        Some(p) => GlobalConfig::load(p)?,
        None => GlobalConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.world.master_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(&cli)?;
    configure_workers(cli.workers);
    let ctx = Ctx {
        out: cli.out.clone().unwrap_or_else(|| cfg.paths.out_dir.clone()),
        seed: cfg.world.master_seed,
        seed_override: cli.seed,
        exec: Exec::from_workers(cli.workers),
        cfg,
    };
    match cli.command {
        Command::GenData => gen_data(&ctx, out),
        Command::TrainVerbalizer { policy, data } => cmd_train_verbalizer(&ctx, policy, &data, out),
        Command::TrainReasoner { source, data } => cmd_train_reasoner(&ctx, &source, &data, out),
        Command::Eval { source, reasoner, data } => cmd_eval(&ctx, &source, reasoner.as_deref(), &data, out),
        Command::Ablate => cmd_ablate(&ctx, out, false),
        Command::Pipeline => cmd_ablate(&ctx, out, true),
        Command::Check => cmd_check(&ctx, out),
    }
}

fn io_out(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn gen_data(ctx: &Ctx, out: &mut dyn Write) -> Result<()> {
    let dataset = gen_dataset(&ctx.cfg.world, ctx.exec)?;
    write_dataset(&dataset, &ctx.out)?;
    for name in [CATALOG_FILE, TRAIN_FILE, EVAL_FILE] {
        let path = ctx.out.join(name);
        writeln!(out, "{}  {}", file_digest(&path)?, path.display()).map_err(io_out)?;
    }
    Ok(())
}

fn write_training(
    dir: &Path,
    stem: &str,
    kind: ParamsKind,
    trained: &(Vec<f64>, TrainingLog),
    out: &mut dyn Write,
) -> Result<()> {
    let params_path = dir.join(format!("{stem}_params.json"));
    let log_path = dir.join(format!("{stem}_log.csv"));
    save_params(&params_path, kind, &trained.0)?;
    write_atomic(&log_path, &trained.1.to_csv()?)?;
    writeln!(out, "wrote {} and {}", params_path.display(), log_path.display()).map_err(io_out)
}

fn load_data(ctx: &Ctx, data: &DataArg) -> Result<Dataset> {
    let dir = ctx.data_dir(data);
    info!("loading dataset from {}", dir.display());
    load_dataset(&dir)
}

fn cmd_train_verbalizer(ctx: &Ctx, policy: PolicyKind, data: &DataArg, out: &mut dyn Write) -> Result<()> {
    let dataset = load_data(ctx, data)?;
    let component = match policy {
        PolicyKind::Action => 1,
        PolicyKind::Rewrite => 2,
    };
    let trained = train_verbalizer(
        &ctx.cfg,
        &dataset,
        policy,
        &ctx.cfg.reward,
        component_seed(ctx.seed, component),
        ctx.exec,
    )?;
    std::fs::create_dir_all(&ctx.out).map_err(|e| Error::io(&ctx.out, e))?;
    write_training(&ctx.out, policy.label(), policy.into(), &trained, out)
}

fn load_verbalizer(path: &Path) -> Result<Verbalizer> {
    let saved = load_params(path)?;
    let kind = saved.kind.policy().ok_or_else(|| {
        Error::Validation(vec![format!("{} holds reasoner parameters, not a verbalizer", path.display())])
    })?;
    Verbalizer::learned(kind, &saved.flat)
}

fn source_verbalizer(ctx: &Ctx, source: &SourceArgs) -> Result<Verbalizer> {
    match (&source.verbalizer, source.raw, source.zero_shot) {
        (Some(p), _, _) => load_verbalizer(p),
        (None, true, _) => Ok(Verbalizer::Template),
        (None, false, true) => Ok(Verbalizer::Heuristic(ctx.cfg.verbalizer.heuristic.clone())),
        _ => Err(Error::Validation(vec![
            "choose a context source: --verbalizer <file>, --raw or --zero-shot".into(),
        ])),
    }
}

fn cmd_train_reasoner(ctx: &Ctx, source: &SourceArgs, data: &DataArg, out: &mut dyn Write) -> Result<()> {
    let verbalizer = source_verbalizer(ctx, source)?;
    let dataset = load_data(ctx, data)?;
    let (stem, component) = if source.raw { ("raw_reasoner", 5) } else { ("reasoner", 4) };
    let trained = train_reasoner(&ctx.cfg, &dataset, &verbalizer, component_seed(ctx.seed, component), ctx.exec)?;
    std::fs::create_dir_all(&ctx.out).map_err(|e| Error::io(&ctx.out, e))?;
    write_training(&ctx.out, stem, ParamsKind::Reasoner, &trained, out)
}

fn cmd_eval(
    ctx: &Ctx,
    source: &SourceArgs,
    reasoner: Option<&Path>,
    data: &DataArg,
    out: &mut dyn Write,
) -> Result<()> {
    let verbalizer = source_verbalizer(ctx, source)?;
    let reasoner = match reasoner {
        None => ReasonerChoice::Oracle(ctx.cfg.oracle.clone()),
        Some(p) => {
            let saved = load_params(p)?;
            if saved.kind != ParamsKind::Reasoner || saved.flat.len() != N_REASONER_FEATURES {
                return Err(Error::Validation(vec![format!("{} is not a reasoner parameter file", p.display())]));
            }
            ReasonerChoice::Trained(saved.flat)
        }
    };
    let dataset = load_data(ctx, data)?;
    let m = evaluate(&verbalizer, &reasoner, &dataset.eval, &dataset.catalog, ctx.exec)?;
    let json = serde_json::to_string_pretty(&m).map_err(|e| Error::Internal(e.to_string()))?;
    writeln!(out, "{json}").map_err(io_out)
}

fn save_seed_artifacts(dir: &Path, dataset: &Dataset, art: &SeedArtifacts, out: &mut dyn Write) -> Result<()> {
    write_dataset(dataset, &dir.join("data"))?;
    let slots = [
        ("action", ParamsKind::Action, &art.action),
        ("rewrite", ParamsKind::Rewrite, &art.rewrite),
        ("rewrite_ranking", ParamsKind::Rewrite, &art.rewrite_ranking),
        ("reasoner", ParamsKind::Reasoner, &art.reasoner_on_rewrite),
        ("raw_reasoner", ParamsKind::Reasoner, &art.reasoner_on_raw),
    ];
    for (stem, kind, slot) in slots {
        if let Some(t) = slot {
            write_training(dir, stem, kind, t, out)?;
        }
    }
    Ok(())
}

fn cmd_ablate(ctx: &Ctx, out: &mut dyn Write, keep_artifacts: bool) -> Result<()> {
    let mut cfg = ctx.cfg.clone();
    if let Some(seed) = ctx.seed_override {
        cfg.ablate.seeds = vec![seed];
    }
    let run = run_ablation(&cfg, ctx.exec)?;
    if keep_artifacts {
        for (seed, art) in &run.artifacts {
            let dataset = gen_dataset(&world_for_seed(&cfg, *seed), ctx.exec)?;
            save_seed_artifacts(&ctx.out.join(format!("seed_{seed}")), &dataset, art, out)?;
        }
    }
    emit_report(&run.table, &ctx.out)?;
    writeln!(out, "wrote {}", ctx.out.join("report.csv").display()).map_err(io_out)?;
    writeln!(out, "wrote {}", ctx.out.join("report.md").display()).map_err(io_out)
}

fn cmd_check(ctx: &Ctx, out: &mut dyn Write) -> Result<()> {
    let results = selfcheck::run_all(ctx.seed)?;
    let mut failed = Vec::new();
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{status} {}: {}", r.name, r.detail).map_err(io_out)?;
        if !r.passed {
            failed.push(r.name.to_string());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(failed.into_iter().map(|n| format!("suite {n} failed")).collect()))
    }
}
