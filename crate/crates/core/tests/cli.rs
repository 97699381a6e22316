use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torus-deform")).args(args).output().unwrap()
}

fn text(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned() + &String::from_utf8_lossy(&o.stderr)
}

const SMALL: &str = r#"
name = "small"
seed = 3

[construction]
point = [0.0, 0.0, 0.0]

[construction.base]
kind = "matrix"
rows = [[1, -1, 1], [-1, 2, -2], [1, -2, 3]]

[verification]
samples = 300
support_samples = 300
gamma = 1.0
xi = 0.5

[lyapunov]
ensemble = 10
horizon = 300
cs_ensemble = 3
cs_horizon = 100

[manifolds]
grid = 3
horizon = 10
horizon_ladder = [5]
length = 5.0
length_ladder = [1.0]
box_length = 10.0
boxes = 4

[ergodicity]
ensemble = 30
horizons = [10, 100]
contrast = "none"
"#;

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn presets_list_and_show() {
    let o = cli(&["preset", "list"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().collect::<Vec<_>>(), ["bv-t3", "catxid", "linear-only"]);
    let o = cli(&["preset", "show", "catxid"]);
    assert!(o.status.success());
    assert!(text(&o).contains("product_with_identity"));
    let o = cli(&["preset", "show", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_reports_field_paths() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write_config(dir.path(), SMALL);
    let o = cli(&["validate", "--config", &ok]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));

    let bad = write_config(dir.path(), &SMALL.replace("xi = 0.5", "xi = 2.0"));
    let o = cli(&["validate", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("verification.xi"), "{}", text(&o));

    let typo = write_config(dir.path(), &SMALL.replace("horizon = 300", "horizon = \"long\""));
    let o = cli(&["validate", "--config", &typo]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("lyapunov.horizon"), "{}", text(&o));

    let o = cli(&["validate", "--config", "/does/not/exist.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_the_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = cli(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "5", "--threads", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    for f in [
        "manifest.json",
        "construction_report.json",
        "verification_report.json",
        "lyapunov.csv",
        "coverage.csv",
        "dispersion.csv",
        "failure_cloud.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
}

#[test]
fn stage_selection_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("a");
    let o = cli(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--stages", "construct,verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(!out.join("lyapunov.csv").exists());

    let o = cli(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--stages", "verify,plot"]);
    assert_eq!(o.status.code(), Some(2));

    // the base maps C_1 into C_0.127, so a 0.05 target fails
    let tight = write_config(dir.path(), &SMALL.replace("xi = 0.5", "xi = 0.05"));
    let out = dir.path().join("b");
    let o = cli(&["run", "--config", &tight, "--out", out.to_str().unwrap(), "--stages", "verify"]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    let cloud = std::fs::read_to_string(out.join("failure_cloud.csv")).unwrap();
    assert!(cloud.lines().any(|l| l.starts_with("cone_invariance,")), "{cloud}");
}

#[test]
fn outputs_do_not_depend_on_the_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut digests = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let o = cli(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", threads]);
        assert_eq!(o.status.code(), Some(0), "{}", text(&o));
        let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        digests.push(m["files"].clone());
    }
    assert_eq!(digests[0], digests[1]);
}
