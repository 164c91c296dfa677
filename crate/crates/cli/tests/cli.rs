use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phasefield"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

const CONVERGE: &str = r#"
experiment = "converge"

[model]
preset = "forced_thin_film"
epsilon = 0.1

[grid]
n = [32, 32]
length_pi = [12.0, 12.0]

[ic]
kind = "manufactured"

[run]
scheme = "imex2"
t_end = 0.4

[split]
m2 = { static = 0.125 }

[converge]
h = [0.1, 0.05, 0.025]
reference = "manufactured"
"#;

#[test]
fn validate_shipped_test3_config_prints_plan() {
    let cfg = configs_dir().join("test3_stabmap.toml");
    let out = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("cells: 99"), "{stdout}");
    assert!(stdout.contains("step budget: 49500"), "{stdout}");
}

#[test]
fn every_shipped_config_validates() {
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let out = run(&["validate", "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), text(&out.stderr));
    }
}

#[test]
fn unknown_subcommand_exits_1_with_usage() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("Usage"), "{}", text(&out.stderr));
}

#[test]
fn converge_prints_csv_and_slope() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, CONVERGE).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "converge",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.starts_with("case,h,error\n"), "{stdout}");
    let slope: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("slope IMEX2 m2=0.125: "))
        .expect("slope line")
        .parse()
        .unwrap();
    assert!((slope - 2.0).abs() < 0.3, "{slope}");
    for f in ["config.toml", "manifest.json", "convergence.csv", "slopes.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let manifest = fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"threads\": 2"), "{manifest}");
}

#[test]
fn config_errors_exit_1_and_list_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let bad = CONVERGE
        .replace("epsilon = 0.1", "epsilon = 0.1\nepsilom = 1.0")
        .replace("t_end = 0.4", "t_end = 0.4\nm2 = 0.1");
    fs::write(&cfg, bad).unwrap();
    let out = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("epsilom") && err.contains("run"), "{err}");
}

#[test]
fn subcommand_must_match_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, CONVERGE).unwrap();
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("does not match"));
}

#[test]
fn numerical_failure_exits_2_and_keeps_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    fs::write(
        &cfg,
        r#"
experiment = "simulate"

[model]
preset = "thin_film"
epsilon = 0.1

[grid]
n = [32, 32]
length_pi = [4.0, 4.0]

[ic]
kind = "cosine_perturbed"
mean = 0.35
amp = 0.3

[run]
scheme = { be = { j = 1 } }
h = 10.0
t_end = 1000.0

[split]
m2 = { static = 0.0 }
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));
    assert!(out_dir.join("failure.csv").exists());
    assert!(out_dir.join("record.csv").exists());
    let manifest = fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"failure\": \"step"), "{manifest}");
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    fs::write(
        &cfg,
        r#"
experiment = "simulate"
seed = 1

[model]
preset = "classic_ch"
epsilon = 0.2

[grid]
n = [8, 8]
length = [6.0, 6.0]

[ic]
kind = "random_perturbed"
mean = 0.0
eta = 0.1

[run]
scheme = "imex1"
h = 0.1
t_end = 0.2

[split]
m2 = { static = 0.04 }
"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for (d, seed) in [(&a, "9"), (&b, "9"), (&c, "10")] {
        let out = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            d.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    }
    let manifest = fs::read_to_string(a.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 9"), "{manifest}");
    let rec = |d: &Path| fs::read(d.join("record.csv")).unwrap();
    assert_eq!(rec(&a), rec(&b));
    assert_ne!(rec(&a), rec(&c));
}

#[test]
fn seed_beyond_toml_range_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, CONVERGE).unwrap();
    let out = run(&[
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        &u64::MAX.to_string(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("seed"), "{}", text(&out.stderr));
}
