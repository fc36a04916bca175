use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use codeshift_cli::run;

fn cli(args: &[&str]) -> i32 {
    let mut full = vec!["codeshift"];
    full.extend_from_slice(args);
    run(&full)
}

/// Synthetic corpus with a tiny config, trained and scored once for all tests.
struct Fixture {
    _dir: tempfile::TempDir,
    config: PathBuf,
    run: PathBuf,
}

fn tiny_config(dir: &Path) -> PathBuf {
    assert_eq!(cli(&["synth-corpus", "--out", dir.to_str().unwrap(), "--seed", "5"]), 0);
    let path = dir.join("config.json");
    let mut cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for t in ["cs", "cc"] {
        cfg["train"][t]["embedding_dim"] = 8.into();
        cfg["train"][t]["epochs"] = 2.into();
        cfg["train"][t]["batch_size"] = 64.into();
    }
    cfg["estimators"]["mc_passes"] = 2.into();
    cfg["estimators"]["mutants"] = 2.into();
    cfg["estimators"]["probe_epochs"] = 1.into();
    cfg["extraction"]["max_contexts"] = 20.into();
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let c = config.to_str().unwrap();
        for stage in ["make-splits", "extract", "train"] {
            assert_eq!(cli(&[stage, "--config", c, "--shift", "author"]), 0, "{stage}");
        }
        assert_eq!(cli(&["score", "--config", c, "--shift", "author", "--task", "cs", "--method", "all"]), 0);
        let run = std::fs::read_dir(dir.path().join("work")).unwrap().next().unwrap().unwrap().path();
        Fixture { _dir: dir, config, run }
    })
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn data_lines(p: &Path) -> usize {
    read(p).lines().filter(|l| !l.starts_with('#')).count() - 1
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(cli(&["frobnicate"]), 1);
    assert_eq!(cli(&["train", "--task", "xx"]), 1);
    assert_eq!(cli(&["score", "--method", "bogus", "--config", "nowhere.json"]), 1);
    assert_eq!(cli(&["--help"]), 0);
}

#[test]
fn missing_config_or_manifest_is_a_validation_error() {
    assert_eq!(cli(&["make-splits", "--config", "/definitely/not/here.json"]), 2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"manifests": {"timeline": "absent.json"}}"#).unwrap();
    assert_eq!(cli(&["make-splits", "--config", cfg.to_str().unwrap()]), 2);
    std::fs::write(&cfg, r#"{"train": {"cc": {"learning_rate": 0.1}}}"#).unwrap();
    assert_eq!(cli(&["make-splits", "--config", cfg.to_str().unwrap()]), 2);
}

#[test]
fn eval_before_score_names_the_missing_stage() {
    let f = fixture();
    // cc was trained but never scored
    assert_eq!(cli(&["eval", "--config", f.config.to_str().unwrap(), "--shift", "author", "--task", "cc"]), 2);
    assert_eq!(cli(&["eval", "--config", f.config.to_str().unwrap(), "--shift", "timeline"]), 2);
}

#[test]
fn train_writes_checkpoint_and_epoch_log() {
    let f = fixture();
    for task in ["cs", "cc"] {
        let dir = f.run.join("checkpoints/author").join(task);
        assert!(dir.join("model.ckpt").is_file());
        let log = read(&dir.join("train_log.csv"));
        assert!(log.starts_with(&format!("# config_hash={}", f.run.file_name().unwrap().to_string_lossy())));
        assert_eq!(data_lines(&dir.join("train_log.csv")), 2);
    }
}

#[test]
fn score_all_writes_one_csv_per_method_variant_split() {
    let f = fixture();
    let scores: Vec<_> = std::fs::read_dir(f.run.join("scores/author/cs")).unwrap().collect();
    // (vanilla, temp, mc) + 4 mutation operators + 3 growth curves, over validation and three tests
    assert_eq!(scores.len(), 10 * 4);
    let n = data_lines(&f.run.join("scores/author/cs/vanilla_test1.csv"));
    assert_eq!(data_lines(&f.run.join("scores/author/cs/dissector_exp_test1.csv")), n);
    assert!(f.run.join("checkpoints/author/cs/temperature.json").is_file());
    assert!(f.run.join("checkpoints/author/cs/probes.ckpt").is_file());
}

#[test]
fn eval_and_report_are_pure_functions_of_scores() {
    let f = fixture();
    let c = f.config.to_str().unwrap();
    assert_eq!(cli(&["eval", "--config", c, "--shift", "author", "--task", "cs"]), 0);
    let first = read(&f.run.join("reports/author/cs/eval.csv"));
    assert_eq!(cli(&["eval", "--config", c, "--shift", "author", "--task", "cs"]), 0);
    assert_eq!(read(&f.run.join("reports/author/cs/eval.csv")), first);
    assert!(first.contains("cs,author,ood,test3,vanilla,,false,"));
    assert!(first.contains(",mmutant,auc:"));
    let json: serde_json::Value = serde_json::from_str(&read(&f.run.join("reports/author/cs/eval.json"))).unwrap();
    assert_eq!(json["config_hash"], f.run.file_name().unwrap().to_string_lossy().as_ref());
    assert_eq!(json["config"]["estimators"]["mutants"], 2);
}

#[test]
fn sweep_counts_and_filter_agree() {
    let f = fixture();
    let c = f.config.to_str().unwrap();
    let base = ["--config", c, "--shift", "author", "--task", "cs"];
    let sub = |name: &str, extra: &[&str]| cli(&[&[name][..], &base[..], extra].concat());
    assert_eq!(sub("sweep", &["--method", "vanilla", "--split", "test2"]), 0);
    let sweep = read(&f.run.join("reports/author/cs/sweep_vanilla_test2.csv"));
    let rows: Vec<(String, usize)> = sweep
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("threshold"))
        .map(|l| {
            let mut it = l.split(',');
            (it.next().unwrap().to_string(), it.next().unwrap().parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 21);
    let (th, count) = &rows[10];
    assert_eq!(sub("filter", &["--method", "vanilla", "--split", "test2", "--threshold", th]), 0);
    let accepted = f.run.join("reports/author/cs/filter_vanilla_test2_accepted.csv");
    assert_eq!(data_lines(&accepted), *count);

    for (t, acc) in [("0", rows[0].1), ("1.01", 0)] {
        assert_eq!(sub("filter", &["--method", "temp", "--split", "test2", "--threshold", t]), 0);
        assert_eq!(data_lines(&f.run.join("reports/author/cs/filter_temp_scale_test2_accepted.csv")), acc);
    }
}

#[test]
fn filter_without_fitted_state_exits_2() {
    let f = fixture();
    let c = f.config.to_str().unwrap();
    for method in ["temp", "dissector"] {
        let mut args = vec!["filter", "--config", c, "--shift", "author", "--task", "cc", "--method", method, "--threshold", "0.5"];
        if method == "dissector" {
            args.extend(["--variant", "exp"]);
        }
        assert_eq!(cli(&args), 2, "{method}");
    }
    // mmutant without --variant is a usage error
    assert_eq!(cli(&["filter", "--config", c, "--shift", "author", "--task", "cs", "--method", "mmutant", "--threshold", "0.5"]), 1);
}

#[test]
fn seed_flag_changes_the_hash() {
    let f = fixture();
    let c = f.config.to_str().unwrap();
    // A different seed addresses a fresh, empty run directory.
    assert_eq!(cli(&["train", "--config", c, "--shift", "author", "--seed", "77"]), 2);
}
