use std::path::Path;
use std::process::{Command, Output};

const ROUNDABOUT: &str = r#"
seed = 5

[generator]
kind = "roundabout"

[model]
kind = "roundabout_branches"
noise_std = 0.02
generator = {}

[data]
n = 1
n_cal = 10
n_test = 30

[calibration]
method = "pts_crc"
alpha = 0.01
m = 2
"#;

fn ptscrc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptscrc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn generate_single_series_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", ROUNDABOUT);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(ptscrc(&["generate", "--config", &cfg], &a).status.success());
    assert!(ptscrc(&["generate", "--config", &cfg], &b).status.success());
    let data = std::fs::read(a.join("data.csv")).unwrap();
    assert_eq!(data, std::fs::read(b.join("data.csv")).unwrap());
    assert_eq!(String::from_utf8(data).unwrap().lines().count(), 2);
    assert_eq!(manifest(&a)["created_unix"], 1700000000u64);
}

#[test]
fn full_space_sentinel_covers_everything() {
    let tmp = tempfile::tempdir().unwrap();
    // 10 calibration items cannot certify alpha = 0.01
    let cfg = write(tmp.path(), "c.toml", ROUNDABOUT);
    let out = tmp.path().join("e");
    let res = ptscrc(&["evaluate", "--config", &cfg], &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let eval: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("evaluation.json")).unwrap()).unwrap();
    assert_eq!(eval["lambda"], "inf");
    let mut reader = csv::Reader::from_path(out.join("items.csv")).unwrap();
    let rows: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 30);
    assert!(rows.iter().all(|r| &r[2] == "1"));
}

#[test]
fn calibrated_spec_round_trips_through_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", &ROUNDABOUT.replace("alpha = 0.01", "alpha = 0.2"));
    let cal = tmp.path().join("cal");
    assert!(ptscrc(&["calibrate", "--config", &cfg], &cal).status.success());
    let spec_path = cal.join("calibrated.json");
    let reuse = ROUNDABOUT.replace("m = 2", &format!("m = 2\nspec = {:?}", spec_path.to_str().unwrap()));
    let cfg2 = write(tmp.path(), "reuse.toml", &reuse);
    let (direct, loaded) = (tmp.path().join("direct"), tmp.path().join("loaded"));
    assert!(ptscrc(&["evaluate", "--config", &cfg], &direct).status.success());
    assert!(ptscrc(&["evaluate", "--config", &cfg2], &loaded).status.success());
    assert_eq!(
        std::fs::read(direct.join("items.csv")).unwrap(),
        std::fs::read(loaded.join("items.csv")).unwrap()
    );
}

#[test]
fn mutated_config_changes_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write(tmp.path(), "a.toml", ROUNDABOUT);
    let b = write(tmp.path(), "b.toml", &ROUNDABOUT.replace("noise_std = 0.02", "noise_std = 0.03"));
    let (oa, ob, oc) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert!(ptscrc(&["generate", "--config", &a], &oa).status.success());
    assert!(ptscrc(&["generate", "--config", &b], &ob).status.success());
    assert!(ptscrc(&["generate", "--config", &a, "--seed", "6"], &oc).status.success());
    let hashes: Vec<_> = [&oa, &ob, &oc].iter().map(|d| manifest(d)["config_hash"].clone()).collect();
    assert_ne!(hashes[0], hashes[1]);
    assert_ne!(hashes[0], hashes[2]);
    assert_eq!(manifest(&oc)["seed"], 6);
}

#[test]
fn schema_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", &ROUNDABOUT.replace("alpha = 0.01", "alpah = 0.01"));
    let res = ptscrc(&["calibrate", "--config", &cfg], &tmp.path().join("o"));
    assert_eq!(res.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(report["error"], "config");
    assert!(report["message"].as_str().unwrap().contains("alpah"));

    let cfg = write(tmp.path(), "d.toml", "seed = 1\n");
    let res = ptscrc(&["mpc-power", "--config", &cfg], &tmp.path().join("p"));
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("power"));
}

#[test]
fn infeasible_control_exits_with_two_after_writing() {
    let tmp = tempfile::tempdir().unwrap();
    // a margin of 1e-7 W exceeds any interference budget on this channel
    let cfg = write(
        tmp.path(),
        "c.toml",
        r#"
seed = 3
[generator]
kind = "blockage_channel"
[model]
kind = "knn"
k = 5
corpus = { kind = "generated", n = 100, seed = 1, generator = { kind = "blockage_channel" } }
[data]
n_cal = 50
[power]
alpha = 1e-7
episodes = 5
methods = ["pts_crc"]
"#,
    );
    let out = tmp.path().join("o");
    let res = ptscrc(&["mpc-power", "--config", &cfg], &out);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(report["error"], "infeasible");
    assert!(out.join("episodes.csv").exists() && out.join("manifest.json").exists());
}

#[test]
fn summarize_rejects_empty_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let res = ptscrc(&["summarize", empty.to_str().unwrap()], &tmp.path().join("o"));
    assert_eq!(res.status.code(), Some(1));
}
