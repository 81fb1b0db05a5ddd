use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hyst_core::corpus::load_splits;
use hyst_core::predictions::Predictions;
use hyst_core::synthetic::{write_synthetic, SyntheticConfig};

fn hyst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyst"))
        .args(args)
        .env_remove("HYST_DATA_DIR")
        .env_remove("MULTIWOZ_DIR")
        .env("RUST_BACKTRACE", "0")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hyst(args);
    assert!(
        out.status.success(),
        "hyst {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn err(args: &[&str]) -> String {
    let out = hyst(args);
    assert!(!out.status.success(), "hyst {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn with<'a>(cmd: &'a str, common: &[&'a str]) -> Vec<&'a str> {
    [&[cmd][..], common].concat()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A 2000-dialogue synthetic corpus whose 10% desk subsample holds about
/// 200 dialogues, plus a config that keeps training to two epochs.
fn fixture() -> (tempfile::TempDir, PathBuf, PathBuf) {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    write_synthetic(&data, &SyntheticConfig { n_dialogues: 2000, seed: 5 }).unwrap();
    let config = root.path().join("run.toml");
    fs::write(&config, "desk_scale = true\n\n[train]\nepochs = 2\n").unwrap();
    (root, data, config)
}

fn single_run_dir(out: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "expected one run directory in {}", out.display());
    dirs[0].clone()
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn desk_scale_reproduce_emits_every_section_and_is_byte_identical() {
    let (root, data, config) = fixture();
    let out_a = root.path().join("a");
    let out_b = root.path().join("b");
    let args = |out: &Path| {
        vec![
            "reproduce".to_string(),
            "-q".into(),
            "--config".into(),
            s(&config).into(),
            "--data-dir".into(),
            s(&data).into(),
            "--out".into(),
            s(out).into(),
        ]
    };
    let a: Vec<String> = args(&out_a);
    let summary = ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    for section in [
        "Corpus statistics",
        "Per-slot statistics",
        "Joint goal accuracy (test split)",
        "Per-domain joint accuracy",
        "Per-slot accuracy",
        "Reachability",
    ] {
        assert!(summary.contains(section), "missing section {section:?}");
    }
    for system in ["majority", "JST seed 1", "OV seed 3", "HyST seed 2", "JST ensemble", "OV ensemble", "HyST ensemble"] {
        assert!(summary.contains(system), "missing system {system:?}");
    }

    let run = single_run_dir(&out_a);
    for rel in [
        "config.json",
        "ingest.json",
        "stats.json",
        "candidates/train.jsonl",
        "candidates/reachability-dev.json",
        "checkpoints/ov-seed1.ckpt",
        "checkpoints/jst-seed3.ckpt",
        "logs/jst-seed2.csv",
        "predictions/hyst-ensemble-test.jsonl",
        "hybrid/assignment-seed1.json",
        "reports/test/report.json",
        "reports/test/summary.txt",
    ] {
        assert!(run.join(rel).is_file(), "missing artifact {rel}");
    }
    let manifest = fs::read_to_string(run.join("manifest.jsonl")).unwrap();
    let commands: Vec<String> = manifest
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["subcommand"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(
        commands,
        ["ingest", "stats", "candidates", "train-jst", "train-ov", "predict", "select-hybrid", "ensemble", "evaluate", "reproduce"]
    );

    let b: Vec<String> = args(&out_b);
    ok(&b.iter().map(String::as_str).collect::<Vec<_>>());
    let run_b = single_run_dir(&out_b);
    assert_eq!(run.file_name(), run_b.file_name());
    let (ta, tb) = (tree(&run), tree(&run_b));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        assert!(v == &tb[k], "{} differs between identical runs", k.display());
    }

    // Re-running into the same directory reuses every artifact.
    ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    let after = tree(&run);
    for (k, v) in &ta {
        if k != Path::new("manifest.jsonl") {
            assert!(v == &after[k], "{} changed on rerun", k.display());
        }
    }
}

#[test]
fn stages_demand_their_prerequisites() {
    let (root, data, config) = fixture();
    let out = root.path().join("out");
    let common = ["--config", s(&config), "--data-dir", s(&data), "--out", s(&out), "-q"];
    let run = |cmd: &'static str| with(cmd, &common);

    assert!(err(&run("stats")).contains("run `hyst ingest` first"));
    ok(&run("ingest"));
    assert!(err(&run("train-ov")).contains("run `hyst candidates` first"));
    assert!(err(&run("predict")).contains("run `hyst train-jst` first"));
    assert!(err(&run("select-hybrid")).contains("run `hyst predict` first"));
    assert!(err(&run("ensemble")).contains("run `hyst predict` first"));
    assert!(err(&run("evaluate")).contains("run `hyst predict` first"));

    ok(&run("candidates"));
    let mut one_seed = run("train-jst");
    one_seed.extend(["--seed", "2"]);
    ok(&one_seed);
    let dir = single_run_dir(&out);
    assert!(dir.join("checkpoints/jst-seed2.ckpt").is_file());
    assert!(!dir.join("checkpoints/jst-seed1.ckpt").exists());

    let mut bad_seed = run("train-jst");
    bad_seed.extend(["--seed", "9"]);
    assert!(err(&bad_seed).contains("not among the configured seeds"));
}

#[test]
fn artifacts_are_never_overwritten() {
    let (root, data, config) = fixture();
    let out = root.path().join("out");
    let common = ["--config", s(&config), "--data-dir", s(&data), "--out", s(&out), "-q"];
    let run = |cmd: &'static str| with(cmd, &common);
    ok(&run("ingest"));
    ok(&run("stats"));
    let stats = single_run_dir(&out).join("stats.txt");
    fs::write(&stats, "tampered\n").unwrap();
    assert!(err(&run("stats")).contains("refusing to overwrite"));
    assert_eq!(fs::read_to_string(&stats).unwrap(), "tampered\n");
}

#[test]
fn invalid_config_fails_before_any_work() {
    let (root, data, _) = fixture();
    let out = root.path().join("out");
    let config = root.path().join("bad.toml");
    fs::write(&config, "seeds = [4, 4, 5]\n").unwrap();
    let e = err(&["reproduce", "--config", s(&config), "--data-dir", s(&data), "--out", s(&out)]);
    assert!(e.contains("distinct"), "{e}");
    assert!(!out.exists());

    let e = err(&["ingest", "--threshold", "1.5", "--data-dir", s(&data), "--out", s(&out)]);
    assert!(e.contains("threshold"), "{e}");
    let e = err(&["ingest", "--out", s(&out)]);
    assert!(e.contains("no data directory"), "{e}");
    fs::write(&config, "max_ngrams = 3\n").unwrap();
    assert!(err(&["ingest", "--config", s(&config), "--data-dir", s(&data)]).contains("invalid config"));
    assert!(!out.exists());
}

#[test]
fn data_root_comes_from_the_environment() {
    let (root, data, config) = fixture();
    let out = root.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_hyst"))
        .args(["ingest", "-q", "--config", s(&config), "--out", s(&out)])
        .env_remove("HYST_DATA_DIR")
        .env("MULTIWOZ_DIR", &data)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(single_run_dir(&out).join("ingest.json").is_file());
}

#[test]
fn gold_predictions_score_one_hundred_percent() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    write_synthetic(&data, &SyntheticConfig { n_dialogues: 120, seed: 2 }).unwrap();
    let gold = load_splits(&data).unwrap();
    let path = root.path().join("gold.jsonl");
    Predictions::from_gold(&gold.test).write(&path).unwrap();
    let out = root.path().join("out");
    let text = ok(&["evaluate", "-q", "--predictions", s(&path), "--data-dir", s(&data), "--out", s(&out)]);
    let row = text.lines().find(|l| l.starts_with("gold ")).expect("gold row");
    assert!(row.contains("100.00"), "{row}");
    assert_eq!(text.matches("100.00").count(), 1 + 7 + 37);

    let dev_path = root.path().join("dev.jsonl");
    Predictions::from_gold(&gold.dev).write(&dev_path).unwrap();
    let e = err(&["evaluate", "--predictions", s(&dev_path), "--data-dir", s(&data), "--out", s(&out)]);
    assert!(e.contains("no prediction for"), "{e}");
}
