use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bandlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bandlab")).args(args).output().expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn spectrum_reports_lattice_dimension() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bandlab(&["spectrum", "--manifold", "torus2", "--L", "13", "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(tmp.path());
    assert_eq!(s["k_L"], 13);
    assert!(s["lambda_max"].as_f64().unwrap() <= 13.0);
}

#[test]
fn torus_admissibility_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bandlab(&["admissible", "--manifold", "torus2", "--L", "20", "--eps", "0.25", "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(summary(tmp.path())["C"].as_f64().unwrap() <= 2.5);
}

#[test]
fn invalid_manifold_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let out = bandlab(&["spectrum", "--manifold", "klein_bottle", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.exists());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert_eq!(err["code"], 3);
}

#[test]
fn module_errors_have_their_own_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let too_far = bandlab(&["concentration", "--R", "40", "--out", dir]);
    assert_eq!(too_far.status.code(), Some(6));
    let bad_file = tmp.path().join("fam.txt");
    fs::write(&bad_file, "20 0 0.5\n").unwrap();
    let malformed = bandlab(&["mz", "--family-file", bad_file.to_str().unwrap(), "--out", dir]);
    assert_eq!(malformed.status.code(), Some(13));
    let usage = bandlab(&["spectrum", "--no-such-flag"]);
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# small run\nmanifold = sphere2\nL = 3, 5 # two levels\nseed = 7\n").unwrap();
    let dir = tmp.path().join("out");
    let out = bandlab(&["spectrum", "--config", cfg.to_str().unwrap(), "--L", "4", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let s = summary(&dir);
    assert_eq!(s["manifold"], "sphere2");
    // l(l+1) <= 16 holds for l <= 3
    assert_eq!(s["k_L"], 16);
    let written = fs::read_to_string(dir.join("config.txt")).unwrap();
    assert!(written.contains("L = 4\n") && written.contains("seed = 7\n"));

    fs::write(&cfg, "L = 5\nunknown_key = 1\n").unwrap();
    let bad = bandlab(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in [&["fekete", "--L", "8,12", "--dilation", "0.3"][..], &["density", "--L", "20,30", "--R", "3,4"][..]] {
        let a = tmp.path().join(format!("{}_a", cmd[0]));
        let b = tmp.path().join(format!("{}_b", cmd[0]));
        for dir in [&a, &b] {
            let mut args = cmd.to_vec();
            args.extend(["--out", dir.to_str().unwrap()]);
            assert!(bandlab(&args).status.success());
        }
        assert_eq!(data_files(&a), data_files(&b));
        let digests = |d: &Path| {
            let m: Value = serde_json::from_str(&fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
            m["files"].clone()
        };
        assert_eq!(digests(&a), digests(&b));
    }
}

#[test]
fn infinite_separation_is_an_empty_field() {
    let tmp = tempfile::tempdir().unwrap();
    let fam = tmp.path().join("single.txt");
    fs::write(&fam, "3 1 0.25 0.5\n").unwrap();
    let dir = tmp.path().join("out");
    let out = bandlab(&["mz", "--L", "3", "--family-file", fam.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("mz.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "separation").unwrap();
    assert_eq!(row[col], "");
    for file in ["mz.csv", "summary.json", "frame_lower.txt"] {
        let text = fs::read_to_string(dir.join(file)).unwrap().to_lowercase();
        let bad = text
            .split(|c: char| !c.is_ascii_alphanumeric())
            .any(|tok| matches!(tok, "nan" | "inf" | "infinity"));
        assert!(!bad, "{file}");
    }
}

#[test]
fn manifest_digests_match_files() {
    use sha2_check::digest_hex;
    let tmp = tempfile::tempdir().unwrap();
    assert!(bandlab(&["kernel", "--L", "10,20", "--trials", "5", "--out", tmp.path().to_str().unwrap()]).status.success());
    let m: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    let files = m["files"].as_array().unwrap();
    assert!(files.len() >= 4);
    for f in files {
        let bytes = fs::read(tmp.path().join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), digest_hex(&bytes));
    }
    assert!(m["stages"].as_array().unwrap().iter().all(|s| s["seconds"].as_f64().unwrap() >= 0.0));
}

mod sha2_check {
    use sha2::{Digest, Sha256};

    pub fn digest_hex(bytes: &[u8]) -> String {
        hex::encode(Sha256::digest(bytes))
    }
}
