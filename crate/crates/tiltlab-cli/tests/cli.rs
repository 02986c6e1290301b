use std::path::Path;
use std::process::{Command, Output};

fn tiltlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tiltlab"))
        .current_dir(dir)
        .env_remove("TILTLAB_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn meta(path: &Path) -> serde_json::Value {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta.json");
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn help_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiltlab(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("verify"));
}

#[test]
fn every_invalid_field_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiltlab(dir.path(), &["sample-ensemble", "--lambda", "0.5", "--n", "0", "--boundary", "wavy"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ratio must exceed 1"), "{err}");
    assert!(err.contains("ensemble.n"), "{err}");
    assert!(err.contains("ensemble.boundary"), "{err}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(tiltlab(dir.path(), &["hydro", "--bogus"]).status.code(), Some(2));
}

#[test]
fn file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 11\n[ensemble]\nlambda = 3.0\nn = 3\ngrid_points = 17\ndraws = 2\nsweeps = 30\n").unwrap();
    let out = tiltlab(dir.path(), &["--config", "run.toml", "sample-ensemble", "--n", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("ensemble.csv");
    let m = meta(&csv);
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config"]["ensemble"]["lambda"], 3.0);
    assert_eq!(m["config"]["ensemble"]["n"], 2);
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next(), Some("draw,t,x1,x2"));
    assert_eq!(text.lines().count(), 1 + 2 * 17);
}

#[test]
fn output_directory_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("nested/out");
    let out = Command::new(env!("CARGO_BIN_EXE_tiltlab"))
        .current_dir(dir.path())
        .env("TILTLAB_OUT_DIR", &target)
        .args(["fs-density", "--points", "21"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let table = std::fs::read_to_string(target.join("fs_density.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("x,density"));
    assert_eq!(table.lines().count(), 22);
}

#[test]
fn file_in_place_of_output_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("taken"), "").unwrap();
    let out = tiltlab(dir.path(), &["--out-dir", "taken", "fs-density"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unseeded_runs_record_their_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiltlab(dir.path(), &["sample-one-line", "--draws", "3", "--grid-points", "9"]);
    assert_eq!(out.status.code(), Some(0));
    let m = meta(&dir.path().join("one_line.csv"));
    let seed = m["seed"].as_u64().expect("seed recorded");
    assert_eq!(m["config"]["seed"].as_u64(), Some(seed));
    assert!(m["build"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));

    let again = tiltlab(dir.path(), &["sample-one-line", "--draws", "3", "--grid-points", "9", "--seed", &seed.to_string(), "--out", "again.csv"]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("one_line.csv")).unwrap(), std::fs::read(dir.path().join("again.csv")).unwrap());
}

#[test]
fn every_sampling_method_runs() {
    let dir = tempfile::tempdir().unwrap();
    for m in ["exact", "pbr", "mcmc"] {
        let name = format!("{m}.csv");
        let out = tiltlab(dir.path(), &["sample-one-line", "--method", m, "--draws", "4", "--grid-points", "17", "--seed", "1", "--sweeps", "50", "--out", &name]);
        assert_eq!(out.status.code(), Some(0), "{m}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(std::fs::read_to_string(dir.path().join(&name)).unwrap().lines().count(), 1 + 4 * 17);
    }
}

#[test]
fn hydro_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiltlab(dir.path(), &["hydro", "--out", "scaffold.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("scaffold.csv")).unwrap();
    // Reference point has n0 = 319, so lines 2..=319.
    assert_eq!(text.lines().count(), 1 + 318);
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(5) == Some("1")));

    let out = tiltlab(dir.path(), &["hydro", "--emit", "envelope", "--k", "400", "--height", "10", "--out", "env.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = tiltlab(dir.path(), &["hydro", "--emit", "envelope", "--k", "5", "--out", "env.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = tiltlab(dir.path(), &["hydro", "--emit", "shape", "--T", "10", "--K", "2", "--out", "shape.csv"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn verify_exit_status_follows_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiltlab(dir.path(), &["verify", "--suite", "geometry", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let lines = std::fs::read_to_string(dir.path().join("verify.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 3);
    for l in lines.lines() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert_eq!(v["pass"], true);
    }
    // The smoke budget is too small for the confinement ratios.
    let out = tiltlab(dir.path(), &["verify", "--suite", "confinement", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn verify_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for (threads, name) in [("1", "a.jsonl"), ("2", "b.jsonl")] {
        let out = tiltlab(dir.path(), &["--threads", threads, "verify", "--suite", "pbr", "--seed", "8", "--out", name]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(dir.path().join("a.jsonl")).unwrap(), std::fs::read(dir.path().join("b.jsonl")).unwrap());
}
