use std::path::{Path, PathBuf};
use std::process::Command;

use lossforge::cli::{self, ExperimentConfig};
use lossforge::data;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bin(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lossforge"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn quick_with(extra: &str, dir: &Path) -> PathBuf {
    let mut text = std::fs::read_to_string(configs().join("quick.toml")).unwrap();
    text.push_str(extra);
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn shipped_configs_load() {
    for name in ["quick.toml", "longtail.toml", "groups.toml"] {
        ExperimentConfig::load(&configs().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn unknown_key_exits_with_config_code() {
    let t = tempfile::tempdir().unwrap();
    let cfg = quick_with("\n[extra]\nfoo = 1\n", t.path());
    let out = bin(&["run", "--config", cfg.to_str().unwrap()], t.path());
    assert_eq!(out.status.code(), Some(cli::EXIT_CONFIG), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn invalid_value_exits_with_config_code() {
    let t = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("quick.toml")).unwrap().replace("rho = 10.0", "rho = 0.5");
    let p = t.path().join("bad.toml");
    std::fs::write(&p, text).unwrap();
    let out = bin(&["gen-data", "--config", p.to_str().unwrap()], t.path());
    assert_eq!(out.status.code(), Some(cli::EXIT_CONFIG));
}

#[test]
fn gen_data_is_deterministic_and_round_trips() {
    let cfg = ExperimentConfig::load(&configs().join("quick.toml")).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let da = cli::cmd_gen_data(&cfg, 5, a.path()).unwrap();
    let db = cli::cmd_gen_data(&cfg, 5, b.path()).unwrap();
    for stem in ["full", "train", "val", "test"] {
        let f = format!("{stem}.csv");
        assert_eq!(std::fs::read(da.join(&f)).unwrap(), std::fs::read(db.join(&f)).unwrap(), "{f}");
    }
    let (train, meta) = data::load(&da, "train").unwrap();
    assert_eq!(meta.seed, 5);
    assert_eq!(train, cli::generate(&cfg, 5).unwrap().split.train);
}

#[test]
fn run_then_report() {
    let t = tempfile::tempdir().unwrap();
    let cfg = configs().join("quick.toml");
    let run = bin(&["run", "--config", cfg.to_str().unwrap(), "--out", "o", "--seed", "2"], t.path());
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let dir = String::from_utf8(run.stdout).unwrap().trim().to_string();
    let dir = t.path().join(dir);
    for f in ["alpha.json", "runlog.jsonl", "metrics.csv", "meta.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let log = std::fs::read_to_string(dir.join("runlog.jsonl")).unwrap();
    assert!(log.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
    let report = bin(&["report", dir.to_str().unwrap()], t.path());
    let text = String::from_utf8(report.stdout).unwrap();
    assert!(text.contains("balanced_err"), "{text}");
}

#[test]
fn verify_subcommand_writes_verdict() {
    let t = tempfile::tempdir().unwrap();
    let out = bin(&["verify", "lemma1", "--out", "v"], t.path());
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(t.path().join("v/verify.json")).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
}

#[test]
fn sweep_marks_a_nonempty_frontier() {
    let t = tempfile::tempdir().unwrap();
    let mut text = std::fs::read_to_string(configs().join("groups.toml")).unwrap();
    text = text.replace("t1 = 300", "t1 = 20").replace("t2 = 1000", "t2 = 60");
    let p = t.path().join("g.toml");
    std::fs::write(&p, text).unwrap();
    let mut cfg = ExperimentConfig::load(&p).unwrap();
    let sw = cfg.sweep.as_mut().unwrap();
    sw.lambdas = vec![0.0, 0.5];
    sw.seeds = vec![0];
    let dir = cli::cmd_sweep(&cfg, 0, t.path(), 1).unwrap();
    let summary = cli::cmd_report(&dir).unwrap();
    assert!(summary.contains('*'), "{summary}");
    let rows = csv::Reader::from_path(dir.join("pareto.csv")).unwrap().records().count();
    assert_eq!(rows, 4);
}
