use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 42
techniques = ["Linear"]
subscales = ["Speech", "Walking"]

[learning]
n_iter = 2
fine_tune_budget = 16

[learning.space]
n_estimators = [32]
max_depth = [2, 3]
"#;

fn alscast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alscast"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn stage(name: &str, config: &Path, out: &Path) -> Output {
    alscast(&[name, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn tree_bytes(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn staged_run_matches_run_all() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let whole = dir.path().join("whole");
    let staged = dir.path().join("staged");
    let out = stage("run-all", &config, &whole);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["synth", "preprocess", "interpolate", "train", "evaluate", "taylor"] {
        let out = stage(name, &config, &staged);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let a = tree_bytes(&whole);
    let b = tree_bytes(&staged);
    assert_eq!(
        a.iter().map(|f| &f.0).collect::<Vec<_>>(),
        b.iter().map(|f| &f.0).collect::<Vec<_>>()
    );
    for ((path, x), (_, y)) in a.iter().zip(&b) {
        assert!(x == y, "{} differs", path.display());
    }
    assert!(whole.join("metrics.csv").exists());
    assert!(whole.join("table4.csv").exists());
}

#[test]
fn train_without_features_is_missing_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = stage("train", &config, &dir.path().join("empty"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_method_list_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &format!("methods = []\n{SMALL}"));
    let out = stage("run-all", &config, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "seed = 1\nbogus = true\n");
    let out = stage("synth", &config, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn print_defaults_round_trips() {
    let out = alscast(&["config", "--print-defaults"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("seed = 42"));
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &text);
    let again = alscast(&["config", "--config", config.to_str().unwrap()]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn csv_input_derives_composite() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let synth_out = dir.path().join("synth");
    assert!(stage("synth", &config, &synth_out).status.success());
    let cohort = synth_out.join("cohort");
    let visits = std::fs::read_to_string(cohort.join("visits.csv")).unwrap();
    let items_only: String = visits
        .lines()
        .filter(|l| !l.contains(",Composite,"))
        .map(|l| format!("{l}\n"))
        .collect();
    assert!(items_only.len() < visits.len());
    let visits_path = dir.path().join("items.csv");
    std::fs::write(&visits_path, items_only).unwrap();
    let body = format!(
        "subscales = [\"Composite\"]\n{}\n[input]\nkind = \"csv\"\nsensors = {:?}\nvisits = {:?}\n",
        SMALL.replace("subscales = [\"Speech\", \"Walking\"]", ""),
        cohort.join("sensors.csv").to_str().unwrap(),
        visits_path.to_str().unwrap()
    );
    let csv_config = dir.path().join("csv.toml");
    std::fs::write(&csv_config, body).unwrap();
    let out_dir = dir.path().join("csv-out");
    assert!(stage("synth", &csv_config, &out_dir).status.success());
    let copied = std::fs::read_to_string(out_dir.join("cohort/visits.csv")).unwrap();
    let mut a: Vec<&str> = copied.lines().collect();
    let mut b: Vec<&str> = visits.lines().collect();
    a.sort_unstable();
    b.sort_unstable();
    assert_eq!(a, b);
}
