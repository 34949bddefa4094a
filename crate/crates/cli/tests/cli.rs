use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sdd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdd"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run sdd")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn report(dir: &Path, key: &str, command: &str) -> Value {
    json(&dir.join("out").join(format!("{key}-{command}.report.json")))
}

#[test]
fn list_shows_the_registry() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdd(dir.path(), &["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("driver1963"));
    assert!(text.contains("const-phi"));
    let key = &text[text.find("key2026").unwrap()..text.find("linear-ic").unwrap()];
    for p in ["A=", "B=", "alpha=", "beta=", "delta="] {
        assert!(key.contains(p), "missing {p}");
    }
}

#[test]
fn verify_counts() {
    let dir = tempfile::tempdir().unwrap();
    for (args, key, n) in [
        (vec!["verify", "driver1963"], "driver1963", 2),
        (vec!["verify", "example2010", "--param", "alpha=0.5"], "example2010", 3),
        (vec!["verify", "key2026", "--tau", "0,0.3"], "key2026", 5),
    ] {
        let out = sdd(dir.path(), &args);
        assert!(out.status.success(), "{args:?}");
        let r = report(dir.path(), key, "verify");
        assert_eq!(r["verdicts"]["verify"], "pass");
        assert_eq!(r["max_residuals"].as_object().unwrap().len(), n);
        for v in r["max_residuals"].as_object().unwrap().values() {
            assert!(v.as_f64().unwrap() <= 1e-9);
        }
    }
}

#[test]
fn branches_write_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdd(dir.path(), &["branches", "key2026", "--tau", "0,0.5", "--eps", "1e-4"]);
    assert!(out.status.success());
    let r = report(dir.path(), "key2026", "branches");
    let csvs: Vec<&str> = r["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|v| v.as_str())
        .filter(|p| p.ends_with(".csv"))
        .collect();
    assert_eq!(csvs.len(), 5);
    for p in &csvs {
        let text = fs::read_to_string(dir.path().join(p)).unwrap();
        assert!(text.starts_with("t,x,xdot,s\n"));
    }
    for v in r["max_residuals"].as_object().unwrap().values() {
        assert!(v.as_f64().unwrap() <= 1e-3);
    }

    let out = sdd(dir.path(), &["branches", "key2026"]);
    assert!(out.status.success());
    let r = report(dir.path(), "key2026", "branches");
    let devs = r["max_residuals"].as_object().unwrap();
    assert_eq!(devs.len(), 1);
    assert!(devs["key-red"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn failing_branch_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdd(dir.path(), &["branches", "key2026", "--tau", "0", "--eps", "5"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("key-yellow-tau0: fail"), "{err}");
    let r = report(dir.path(), "key2026", "branches");
    assert_eq!(r["verdicts"]["key-red"], "pass");
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sdd(dir.path(), &["verify", "nope"]).status.code(), Some(2));
    assert_eq!(sdd(dir.path(), &["verify", "key2026", "--param", "Q=1"]).status.code(), Some(2));
    assert_eq!(sdd(dir.path(), &["branches", "driver1963"]).status.code(), Some(2));
    assert_eq!(sdd(dir.path(), &["verify", "driver1963", "--tau", "0.3"]).status.code(), Some(2));
}

#[test]
fn certificates() {
    let dir = tempfile::tempdir().unwrap();
    for (key, red, uniqueness) in [
        ("key2026", "candidate-exists", "inconclusive"),
        ("const-phi", "impossible-nonlinear-g", "unique"),
        ("quadratic-delay", "impossible-nonlinear-g", "unique"),
        ("driver1963", "inapplicable", "inconclusive"),
    ] {
        let out = sdd(dir.path(), &["certify", key]);
        assert!(out.status.success(), "{key}");
        let r = report(dir.path(), key, "certify");
        assert_eq!(r["verdicts"]["red"], red, "{key}");
        assert_eq!(r["verdicts"]["uniqueness"], uniqueness, "{key}");
    }
    let c = json(&dir.path().join("out/const-phi-certify.json"));
    assert_eq!(c["uniqueness_certificate"]["q"], -1.0);
    let qd = json(&dir.path().join("out/quadratic-delay-certify.json"));
    assert_eq!(qd["uniqueness_certificate"]["q"], 2.0);
    let d = json(&dir.path().join("out/driver1963-certify.json"));
    assert_eq!(d["red_uniqueness"]["s0"], -4.0);
    assert_eq!(d["red_uniqueness"]["red_candidates"], 1);
}

#[test]
fn export3d_residuals_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    assert!(sdd(dir.path(), &["export3d", "key2026", "--tau", "0,0.3,1"]).status.success());
    let r = report(dir.path(), "key2026", "export3d");
    let res = r["max_residuals"].as_object().unwrap();
    assert_eq!(res.keys().filter(|k| k.ends_with("/plane")).count(), 7);
    for v in res.values() {
        assert!(v.as_f64().unwrap() <= 1e-12);
    }

    assert!(sdd(dir.path(), &["export3d", "driver1963", "--grid", "2"]).status.success());
    let text = fs::read_to_string(dir.path().join("out/driver1963-3d-driver-red.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.lines().next(), Some("t,s,x"));

    assert!(sdd(dir.path(), &["export3d", "key2026", "--which", "red", "--json"]).status.success());
    let curve = json(&dir.path().join("out/key2026-3d-key-red.json"));
    assert_eq!(curve["rows"].as_array().unwrap().len(), 256);
}

#[test]
fn classify_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    assert!(sdd(dir.path(), &["classify", "key2026", "--tau", "0,0.3"]).status.success());
    let c = json(&dir.path().join("out/key2026-classify.json"));
    let curves = c["closed_forms"].as_array().unwrap();
    assert_eq!(curves.len(), 5);
    for cc in curves {
        assert_eq!(cc["declared"], cc["observed"]);
    }
    assert_eq!(c["integrated"]["segments"][0]["color"], "red");

    let out = sdd(
        dir.path(),
        &["sweep", "key2026", "--tau", "0.3", "--vary", "A=0.5,2", "--vary", "alpha=0.25,0.5,0.75"],
    );
    assert!(out.status.success());
    let rows = json(&dir.path().join("out/key2026-sweep.json"));
    assert_eq!(rows.as_array().unwrap().len(), 6);
    assert!(rows.as_array().unwrap().iter().all(|r| r["verdict"] == "pass"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &["branches", "key2026", "--tau", "0,0.3"],
        &["export3d", "key2026", "--tau", "0.3"],
        &["certify", "driver1963"],
    ];
    let snapshot = || {
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir.path().join("out"))
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    for args in runs {
        assert!(sdd(dir.path(), args).status.success());
    }
    let first = snapshot();
    for args in runs {
        assert!(sdd(dir.path(), args).status.success());
    }
    assert_eq!(first, snapshot());
}
