use std::fs;
use std::path::Path;
use std::process::Command;

use dslab::snapshot;
use dslab::{Field, Grid};
use dslab_cli::config::Config;
use dslab_cli::output::sha256_file;
use serde_json::Value;

const SMALL: &str = "grid.n1 = 24\ngrid.n2 = 24\ngrid.n3 = 24\ncertify.pohozaev = 0.5\ncertify.cylindrical = 5e-2\n";

fn dslab(root: &Path, args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_dslab"))
        .args(args)
        .current_dir(root)
        .output()
        .expect("spawn dslab")
        .status
        .code()
        .unwrap_or(-1)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn manifest_records_config_and_output_digests() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.cfg"), SMALL).unwrap();
    assert_eq!(
        dslab(dir.path(), &["--config", "c.cfg", "--out", "gs", "ground-state"]),
        0
    );
    let manifest = json(&dir.path().join("gs/manifest.json"));
    let cfg = Config::parse(SMALL).unwrap();
    assert_eq!(manifest["config_digest"], cfg.digest());
    assert_eq!(manifest["exit_code"], 0);
    for (rel, digest) in manifest["outputs"].as_object().unwrap() {
        assert_eq!(
            digest.as_str().unwrap(),
            sha256_file(&dir.path().join("gs").join(rel)).unwrap()
        );
    }
    assert!(manifest["summary"]["s_g_caveat"].as_str().is_some());
}

#[test]
fn snapshot_seed_is_recorded_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.cfg"), SMALL).unwrap();
    assert_eq!(
        dslab(dir.path(), &["--config", "c.cfg", "--out", "a", "ground-state"]),
        0
    );
    let seeded = format!("{SMALL}initial.snapshot = a/q.ds3f\n");
    fs::write(dir.path().join("s.cfg"), &seeded).unwrap();
    assert_eq!(
        dslab(dir.path(), &["--config", "s.cfg", "--out", "b", "ground-state"]),
        0
    );
    let manifest = json(&dir.path().join("b/manifest.json"));
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 1);
    assert!(manifest["summary"]["iterations"].as_u64().unwrap() <= 2);

    let other: Field = Field::zeros(&Grid::cubic(16, 16.0).unwrap());
    fs::write(dir.path().join("wrong.ds3f"), snapshot::encode(&other)).unwrap();
    fs::write(
        dir.path().join("w.cfg"),
        format!("{SMALL}initial.snapshot = wrong.ds3f\n"),
    )
    .unwrap();
    assert_eq!(
        dslab(dir.path(), &["--config", "w.cfg", "--out", "w", "ground-state"]),
        2
    );
}

#[test]
fn failing_sweep_points_are_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}sweep.c1 = 0,1\nsweep.c2 = 0\n");
    fs::write(dir.path().join("c.cfg"), cfg).unwrap();
    assert_eq!(
        dslab(
            dir.path(),
            &["--config", "c.cfg", "--out", "s", "--workers", "2", "sweep"]
        ),
        0
    );
    let text = fs::read_to_string(dir.path().join("s/results.jsonl")).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    let status = |c1: f64| lines.iter().find(|l| l["point"]["c1"] == c1).unwrap()["status"].clone();
    assert_eq!(status(0.0), "error");
    assert_eq!(status(1.0), "ok");
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.cfg"), "grid.n4 = 3\n").unwrap();
    assert_eq!(
        dslab(dir.path(), &["--config", "c.cfg", "--out", "x", "identity-suite"]),
        2
    );
    assert_eq!(
        dslab(dir.path(), &["--config", "missing.cfg", "--out", "x", "identity-suite"]),
        4
    );
}
