//! Command-line behavior: exit codes, file outputs and the train/eval flow.

use std::path::Path;

use verblab::cli::run_with_output;
use verblab::eval::{parse_report_csv, SeedLabel, VariantName};
use verblab::params_io::{load_params, ParamsKind};

fn run(args: &[&str]) -> (i32, String) {
    let mut argv = vec!["verblab"];
    argv.extend_from_slice(args);
    let mut out = Vec::new();
    let code = run_with_output(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

const TINY: &str = r#"{
  "world": {"n_train_episodes": 40, "n_eval_episodes": 30},
  "grpo_stage1": {"iterations": 6, "batch_episodes": 4},
  "grpo_stage2": {"iterations": 6, "batch_episodes": 4},
  "ablate": {"seeds": [1, 2]}
}"#;

fn tiny_config(dir: &Path) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, TINY).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&[]).0, 1);
    assert_eq!(run(&["gen-data", "--bogus"]).0, 1);
    assert_eq!(run(&["train-verbalizer", "--policy", "sideways"]).0, 1);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn invalid_config_exits_with_one_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("bad.json");
    for text in [r#"{"world": {"p_noise": 1.5}}"#, r#"{"wrold": {}}"#, "{not json"] {
        std::fs::write(&cfg, text).unwrap();
        let (code, _) = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "gen-data"]);
        assert_eq!(code, 1, "{text}");
        assert!(!out.exists());
    }
}

#[test]
fn missing_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    let (code, _) = run(&["eval", "--raw", "--data", missing.to_str().unwrap()]);
    assert_ne!(code, 0);
    let (code, _) = run(&["eval", "--data", missing.to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn check_passes() {
    let (code, text) = run(&["check"]);
    assert_eq!(code, 0, "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn train_and_evaluate_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let data = dir.path().join("data");
    let models = dir.path().join("models");
    let (data_s, models_s) = (data.to_str().unwrap(), models.to_str().unwrap());

    let (code, text) = run(&["--config", &cfg, "--out", data_s, "gen-data"]);
    assert_eq!(code, 0);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.split_whitespace().next().unwrap().len() == 64));

    let (code, _) = run(&["--config", &cfg, "--out", models_s, "train-verbalizer", "--policy", "rewrite", "--data", data_s]);
    assert_eq!(code, 0);
    let params = models.join("rewrite_params.json");
    assert_eq!(load_params(&params).unwrap().kind, ParamsKind::Rewrite);
    let log = std::fs::read_to_string(models.join("rewrite_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 7);
    assert!(log.starts_with("iter,mean_r_acc,mean_r_len,mean_ratio,objective,max_ratio_dev"));

    let p = params.to_str().unwrap();
    let (code, _) = run(&["--config", &cfg, "--out", models_s, "train-reasoner", "--verbalizer", p, "--data", data_s]);
    assert_eq!(code, 0);
    let reasoner = models.join("reasoner_params.json");
    assert_eq!(load_params(&reasoner).unwrap().flat.len(), 6);

    let (code, text) = run(&[
        "--config",
        &cfg,
        "eval",
        "--verbalizer",
        p,
        "--reasoner",
        reasoner.to_str().unwrap(),
        "--data",
        data_s,
    ]);
    assert_eq!(code, 0);
    let metrics: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(metrics["n_eval"], 30);
    let r = metrics["recall1_overall"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&r));

    let (code, text) = run(&["--config", &cfg, "eval", "--raw", "--data", data_s]);
    assert_eq!(code, 0);
    let metrics: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(metrics["mean_compression"], 1.0);

    // a reasoner file is not a verbalizer
    let (code, _) = run(&["--config", &cfg, "eval", "--verbalizer", reasoner.to_str().unwrap(), "--data", data_s]);
    assert_eq!(code, 1);
}

#[test]
fn ablate_writes_a_complete_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("out");
    let (code, _) = run(&["--config", &cfg, "--out", out.to_str().unwrap(), "ablate"]);
    assert_eq!(code, 0);
    let table = parse_report_csv(&std::fs::read(out.join("report.csv")).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 7 * 3);
    for v in VariantName::ALL {
        let seeds: Vec<SeedLabel> = table.rows.iter().filter(|r| r.variant == v).map(|r| r.seed).collect();
        assert_eq!(seeds, vec![SeedLabel::Seed(1), SeedLabel::Seed(2), SeedLabel::Mean]);
    }
    let template = table.mean_row(VariantName::Template).unwrap();
    assert_eq!(template.mean_compression, 1.0);
    let md = std::fs::read_to_string(out.join("report.md")).unwrap();
    assert!(md.contains("| Variant |"));
    assert!(!out.join("seed_1").exists());

    // --seed narrows the run to one seed
    let single = dir.path().join("single");
    let (code, _) = run(&["--config", &cfg, "--seed", "2", "--out", single.to_str().unwrap(), "ablate"]);
    assert_eq!(code, 0);
    let table = parse_report_csv(&std::fs::read(single.join("report.csv")).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 7 * 2);
}
