use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cmvlab(args: &[&str], dir: &Path, config: &str) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_cmvlab"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .env_remove("CMVLAB_THREADS")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn arcs(v: &Value) -> Vec<(f64, f64)> {
    v["arcs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| (a[0].as_f64().unwrap(), a[1].as_f64().unwrap()))
        .collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const HALF: &str = r#"{"sequence":{"kind":"constant","value":[0.5,0.0]},"q":2}"#;

#[test]
fn bands_constant_half() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = cmvlab(&["bands", "--out", out.to_str().unwrap()], tmp.path(), HALF);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = json(&out.join("arcs.json"));
    let m = a["measure"].as_f64().unwrap();
    assert!(m > 0.0 && m < std::f64::consts::TAU);
    assert_eq!(a["manifest"], "manifest.json");

    let csv = fs::read_to_string(out.join("bands.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# manifest: manifest.json"));
    assert_eq!(lines.next(), Some("q,n,k,Re z,Im z,Re dz/dk,Im dz/dk"));
    assert_eq!(lines.count(), 2 * 64);

    let man = json(&out.join("manifest.json"));
    assert_eq!(man["command"], "bands");
    assert_eq!(man["parameters"]["q"], 2);
    assert_eq!(man["outputs"], serde_json::json!(["bands.csv", "arcs.json"]));
}

#[test]
fn bands_free_is_full_circle() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = cmvlab(
        &["bands", "--out", out.to_str().unwrap()],
        tmp.path(),
        r#"{"sequence":{"kind":"constant","value":[0.0,0.0]},"q":2}"#,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(arcs(&json(&out.join("arcs.json"))), vec![(0.0, std::f64::consts::TAU)]);
}

#[test]
fn odd_q_is_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    let o = cmvlab(&["bands", "--out", tmp.path().to_str().unwrap(), "--q", "3"], tmp.path(), HALF);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("even"));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"sequence":{"random_periodic":{"period":4,"radius":0.8}},"q":4,"nk":16}"#;
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    for (dir, threads, seed) in [(&a, "1", "7"), (&b, "2", "7"), (&c, "1", "8")] {
        let o = cmvlab(
            &["bands", "--out", dir.to_str().unwrap(), "--threads", threads, "--seed", seed],
            tmp.path(),
            cfg,
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["bands.csv", "arcs.json", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("bands.csv")).unwrap(), fs::read(c.join("bands.csv")).unwrap());
    assert_eq!(json(&a.join("manifest.json"))["seed"], 7);
}

#[test]
fn lyapunov_zero_set_matches_bands() {
    let tmp = TempDir::new().unwrap();
    let bands = tmp.path().join("bands");
    let lyap = tmp.path().join("lyap");
    assert!(cmvlab(&["bands", "--out", bands.to_str().unwrap()], tmp.path(), HALF).status.success());
    let o = cmvlab(
        &["lyapunov", "--out", lyap.to_str().unwrap(), "--grid", "512"],
        tmp.path(),
        r#"{"sequence":{"kind":"constant","value":[0.5,0.0]}}"#,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let z = json(&lyap.join("z_arcs.json"));
    assert_eq!(z["n_steps"], 100000);
    assert_eq!(z["eps"], 0.01);
    let (zb, bb) = (arcs(&z), arcs(&json(&bands.join("arcs.json"))));
    assert_eq!(zb.len(), 1);
    let cell = std::f64::consts::TAU / 512.0;
    assert!((zb[0].0 - bb[0].0).abs() <= cell && (zb[0].1 - bb[0].1).abs() <= cell);

    let csv = fs::read_to_string(lyap.join("lyapunov.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("theta,L,N,epsilon"));
    assert_eq!(csv.lines().count(), 2 + 512);
}

#[test]
fn lyapunov_free_is_full_circle() {
    let tmp = TempDir::new().unwrap();
    let o = cmvlab(
        &["lyapunov", "--out", tmp.path().to_str().unwrap(), "--grid", "64"],
        tmp.path(),
        r#"{"sequence":{"kind":"constant","value":[0.0,0.0]}}"#,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let m = json(&tmp.path().join("z_arcs.json"))["measure"].as_f64().unwrap();
    assert_eq!(m, std::f64::consts::TAU);
}

#[test]
fn lyapunov_rejects_bad_sizes() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"sequence":{"kind":"constant","value":[0.5,0.0]}}"#;
    let dir = tmp.path().to_str().unwrap();
    for args in [
        vec!["lyapunov", "--out", dir, "--n-steps", "-5"],
        vec!["lyapunov", "--out", dir, "--n-steps", "10"],
        vec!["lyapunov", "--out", dir, "--grid", "4"],
    ] {
        assert_eq!(cmvlab(&args, tmp.path(), cfg).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unknown_and_missing_fields_are_named() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let o = cmvlab(&["bands", "--out", dir], tmp.path(), r#"{"sequence":{"kind":"constant","value":[0.5,0.0]}}"#);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("q"));
    let o = cmvlab(&["bands", "--out", dir], tmp.path(), r#"{"sequence":{"kind":"constant","value":[0.5,0.0]},"q":2,"qq":1}"#);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("qq"));
    let o = cmvlab(&["bands", "--out", dir], tmp.path(), "{\n\"q\": 2,\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"));
}

#[test]
fn approx_reports() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("pt");
    let o = cmvlab(&["approx", "--out", out.to_str().unwrap(), "--grid", "4096"], tmp.path(), "{}");
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&out.join("report.json"));
    assert_eq!(r["diff_measure_nonincreasing"], true);
    assert_eq!(r["lp_sum"]["holds"], true);
    assert_eq!(r["levels"].as_array().unwrap().len(), 4);
    assert_eq!(r["hausdorff_consecutive"].as_array().unwrap().len(), 3);

    let out = tmp.path().join("zero");
    let o = cmvlab(
        &["approx", "--out", out.to_str().unwrap(), "--grid", "1024"],
        tmp.path(),
        r#"{"family":{"base_amp":0.0,"q0":2,"levels":3}}"#,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&out.join("report.json"));
    let levels = r["levels"].as_array().unwrap();
    let d0 = &levels[0]["diff_measure"];
    assert!(levels.iter().all(|l| &l["diff_measure"] == d0));
}

const HADAMARD: &str = r#"{"coins":{"kind":"hadamard"},"initial":{"kind":"localized","site":0,"spin":"plus"},"steps":200}"#;

#[test]
fn walk_shift_trajectory() {
    let tmp = TempDir::new().unwrap();
    let o = cmvlab(
        &["walk", "--out", tmp.path().to_str().unwrap()],
        tmp.path(),
        r#"{"coins":{"kind":"identity"},"initial":{"kind":"localized","site":0,"spin":"plus"},"steps":10}"#,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("distribution.csv")).unwrap();
    let occupied: Vec<(usize, i64)> = csv
        .lines()
        .skip(2)
        .filter_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[2].parse::<f64>().unwrap() == 1.0).then(|| (f[0].parse().unwrap(), f[1].parse().unwrap()))
        })
        .collect();
    assert_eq!(occupied, (0..=10).map(|t| (t, t as i64)).collect::<Vec<_>>());
}

#[test]
fn walk_hadamard_survival() {
    let tmp = TempDir::new().unwrap();
    let o = cmvlab(&["walk", "--out", tmp.path().to_str().unwrap()], tmp.path(), HADAMARD);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("survival.csv")).unwrap();
    let s: Vec<f64> = csv.lines().skip(2).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(s.len(), 201);
    assert!(s.iter().all(|&p| p > 0.0));
    assert!(s[200] < s[100] && s[100] < s[50] && s[50] < s[0]);
}

#[test]
fn walk_bad_coin_names_site() {
    let tmp = TempDir::new().unwrap();
    let o = cmvlab(
        &["walk", "--out", tmp.path().to_str().unwrap()],
        tmp.path(),
        r#"{"coins":{"kind":"periodic","matrices":[
            [[[1,0],[0,0]],[[0,0],[1,0]]],
            [[[1,0],[1,0]],[[0,0],[1,0]]]
        ]},"initial":{"kind":"localized","site":0,"spin":"plus"},"steps":5}"#,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("site 1"), "{}", stderr(&o));
}

#[test]
fn walk_window_overflow_is_numerical() {
    let tmp = TempDir::new().unwrap();
    let o = cmvlab(
        &["walk", "--out", tmp.path().to_str().unwrap()],
        tmp.path(),
        r#"{"coins":{"kind":"hadamard"},"initial":{"kind":"localized","site":0,"spin":"plus"},"steps":100,"max_sites":64}"#,
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sieve_check_residuals() {
    let tmp = TempDir::new().unwrap();
    let o = cmvlab(
        &["sieve-check", "--out", tmp.path().to_str().unwrap(), "--dim", "24"],
        tmp.path(),
        r#"{"sequence":{"kind":"periodic_table","values":[[0.3,0.1],[-0.2,0.4],[0.0,-0.5]]}}"#,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&tmp.path().join("sieve.json"));
    assert!(r["max_residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(r["dim"], 24);
}

#[test]
fn weyl_defect_free() {
    let tmp = TempDir::new().unwrap();
    let o = cmvlab(
        &["weyl-defect", "--out", tmp.path().to_str().unwrap(), "--samples", "32"],
        tmp.path(),
        r#"{"sequence":{"kind":"constant","value":[0.0,0.0]}}"#,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(json(&tmp.path().join("defect.json"))["max_defect"].as_f64().unwrap() < 1e-8);
    let csv = fs::read_to_string(tmp.path().join("defect.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("theta,r,|M+ + conj(M-)|"));
    assert_eq!(csv.lines().count(), 2 + 32);
}

#[test]
fn weyl_defect_rejects_radius() {
    let tmp = TempDir::new().unwrap();
    let o = cmvlab(
        &["weyl-defect", "--out", tmp.path().to_str().unwrap(), "--r", "0.5"],
        tmp.path(),
        r#"{"sequence":{"kind":"constant","value":[0.0,0.0]}}"#,
    );
    assert_eq!(o.status.code(), Some(2));
}
