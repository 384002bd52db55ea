use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[geometry]
h_per_cell = 0.25
macro_n = 8

[verify]
eps = [0.5, 0.25]
runs = 2
"#;

fn susphom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_susphom")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = susphom(&["tensor", "--config", path(&dir.path().join("nope.toml")), "--quiet"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn unknown_keys_and_three_dimensions_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[geometry]\nradius = 0.2\n").unwrap();
    assert_eq!(susphom(&["tensor", "--config", path(&cfg), "--quiet"]).status.code(), Some(2));
    let out = dir.path().join("o");
    assert_eq!(susphom(&["dilute", "--dim", "3", "--out", path(&out), "--quiet"]).status.code(), Some(2));
}

#[test]
fn singular_shapes_are_reported_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("big.toml");
    fs::write(&cfg, "[geometry]\nh_per_cell = 0.125\n[geometry.shape]\nvolume_fraction = 0.65\nkind = { kind = \"disk\" }\n").unwrap();
    let out = susphom(&["tensor", "--config", path(&cfg), "--out", path(&dir.path().join("o")), "--quiet"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tensor_writes_the_gram_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("o");
    let r = susphom(&["tensor", "--config", path(&cfg), "--out", path(&out), "--quiet"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(out.join("tensor.csv")).unwrap();
    let value = |q: &str, i: &str, j: &str| -> f64 {
        csv.lines()
            .map(|l| l.split(',').collect::<Vec<_>>())
            .find(|f| f[0] == q && f[1] == i && f[2] == j)
            .unwrap()[3]
            .parse()
            .unwrap()
    };
    for (i, j) in [("0", "0"), ("1", "1")] {
        assert!(value("C", i, j) > 0.0);
        assert!((value("mu_star", i, j) - 1.0 - value("C", i, j)).abs() < 1e-12);
    }
    assert!((value("C", "0", "1") - value("C", "1", "0")).abs() < 1e-12);
    let m = manifest(&out);
    assert_eq!(m["command"], "tensor");
    let names: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|a| a["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["resolved.toml", "tensor.csv", "tensor.json"]);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, format!("seed = 2\n{TINY}")).unwrap();
    let out = dir.path().join("o");
    let r = susphom(&["converge", "--config", path(&cfg), "--seed", "7", "--out", path(&out), "--quiet"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(manifest(&out)["seed"], 7);
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    let seeds: Vec<&str> = csv.lines().skip(2).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(seeds, ["7", "8", "7", "8"]);
}

#[test]
fn resolved_config_reproduces_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, format!("{TINY}\n[tolerances]\nsolver = 1e-11\n")).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for cmd in ["fstar", "macro"] {
        assert!(susphom(&[cmd, "--config", path(&cfg), "--seed", "5", "--out", path(&a), "--quiet"]).status.success());
        let resolved = a.join("resolved.toml");
        assert!(susphom(&[cmd, "--config", path(&resolved), "--out", path(&b), "--quiet"]).status.success());
        assert_eq!(manifest(&a), manifest(&b), "{cmd}");
        assert_eq!(fs::read(&resolved).unwrap(), fs::read(b.join("resolved.toml")).unwrap());
    }
}
