use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn atph(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atph"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn scan_default_fits_near_measured_visibilities() {
    let dir = tempfile::tempdir().unwrap();
    ok(&atph(dir.path(), &["scan", "--seed", "5", "--out", "run"]));
    for f in [
        "run.counts.csv",
        "run.counts.json",
        "run.scan.json",
        "run.fringe.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let fits = json(&dir.path().join("run.scan.json"))["fits"]
        .as_array()
        .unwrap()
        .clone();
    assert_eq!(fits.len(), 4);
    for f in fits {
        let v = f["visibility"].as_f64().unwrap();
        assert!((0.80..=0.92).contains(&v), "{v}");
    }
}

#[test]
fn scan_exact_matches_analytic() {
    let dir = tempfile::tempdir().unwrap();
    ok(&atph(dir.path(), &["scan", "--exact", "--out", "e"]));
    for f in json(&dir.path().join("e.scan.json"))["fits"]
        .as_array()
        .unwrap()
    {
        let v = f["visibility"].as_f64().unwrap();
        let want = f["expected_visibility"].as_f64().unwrap();
        assert!((v - want).abs() < 1e-6);
    }
}

#[test]
fn scan_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    ok(&atph(dir.path(), &["scan", "--seed", "9", "--out", "a"]));
    ok(&atph(dir.path(), &["scan", "--seed", "9", "--out", "b"]));
    ok(&atph(dir.path(), &["scan", "--seed", "10", "--out", "c"]));
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.counts.csv"), read("b.counts.csv"));
    assert_eq!(read("a.scan.json"), read("b.scan.json"));
    assert_ne!(read("a.counts.csv"), read("c.counts.csv"));
}

#[test]
fn tomo_calibrated_simulation() {
    let dir = tempfile::tempdir().unwrap();
    ok(&atph(
        dir.path(),
        &[
            "tomo",
            "--seed",
            "2",
            "--workers",
            "2",
            "--set",
            "bootstrap=40",
            "--out",
            "t",
        ],
    ));
    let m = json(&dir.path().join("t.metrics.json"));
    let f = m["fidelity"].as_f64().unwrap();
    let n = m["negativity"].as_f64().unwrap();
    assert!((0.85..=0.90).contains(&f), "{f}");
    assert!((0.34..=0.43).contains(&n), "{n}");
    assert!(m["bootstrap"]["fidelity"]["std"].as_f64().unwrap() > 0.0);
    let s = json(&dir.path().join("t.state.json"));
    assert_eq!(s["real"].as_array().unwrap().len(), 4);
    assert!(s["fit"]["converged"].as_bool().unwrap());
}

#[test]
fn tomo_exact_reference_states() {
    let dir = tempfile::tempdir().unwrap();
    ok(&atph(
        dir.path(),
        &["tomo", "--exact", "--set", "noise=none", "--out", "i"],
    ));
    let m = json(&dir.path().join("i.metrics.json"));
    assert!((m["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((m["negativity"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert!(m["bootstrap"].is_null());

    ok(&atph(
        dir.path(),
        &[
            "tomo",
            "--exact",
            "--set",
            "noise=none",
            "--set",
            "state=werner:0.86",
            "--out",
            "w",
        ],
    ));
    let m = json(&dir.path().join("w.metrics.json"));
    assert!((m["fidelity"].as_f64().unwrap() - 0.895).abs() < 1e-6);
    assert!((m["negativity"].as_f64().unwrap() - 0.395).abs() < 1e-6);
}

#[test]
fn tomo_reads_ingested_counts_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    ok(&atph(
        dir.path(),
        &[
            "tomo",
            "--seed",
            "4",
            "--set",
            "bootstrap=0",
            "--out",
            "first",
        ],
    ));
    ok(&atph(
        dir.path(),
        &[
            "tomo",
            "--set",
            "input=first.counts.csv",
            "--set",
            "bootstrap=0",
            "--out",
            "second",
        ],
    ));
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("first.state.json"), read("second.state.json"));
    assert!(!dir.path().join("second.counts.csv").exists());
}

#[test]
fn tomo_names_missing_settings_and_cleans_up() {
    let dir = tempfile::tempdir().unwrap();
    let csv = "theta,phi,beta,n_f2_apd1,n_f2_apd2,n_f1_apd1,n_f1_apd2\n0.7853981633974483,0,0,10,1,1,10\n";
    std::fs::write(dir.path().join("partial.csv"), csv).unwrap();
    let o = atph(
        dir.path(),
        &["tomo", "--set", "input=partial.csv", "--out", "x"],
    );
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("atom sigma_z x photon sigma_y"), "{err}");
    assert!(!dir.path().join("x.state.json").exists());
}

#[test]
fn calibrate_targets() {
    let dir = tempfile::tempdir().unwrap();
    ok(&atph(dir.path(), &["calibrate", "--out", "c"]));
    let cal = json(&dir.path().join("c.calibration.json"));
    assert!(cal["max_error"].as_f64().unwrap() < 1e-3);
    let conf = std::fs::read_to_string(dir.path().join("c.noise.conf")).unwrap();
    assert!(conf.contains("noise.flip_x"));

    // the written noise file drives a scan that reproduces the targets
    std::fs::write(dir.path().join("scan.conf"), &conf).unwrap();
    ok(&atph(
        dir.path(),
        &[
            "scan",
            "--exact",
            "--config",
            "scan.conf",
            "--set",
            "noise=none",
            "--out",
            "s",
        ],
    ));
    let fits = json(&dir.path().join("s.scan.json"))["fits"]
        .as_array()
        .unwrap()
        .clone();
    assert!((fits[0]["visibility"].as_f64().unwrap() - 0.85).abs() < 1e-6);
    assert!((fits[2]["visibility"].as_f64().unwrap() - 0.87).abs() < 1e-6);

    ok(&atph(
        dir.path(),
        &[
            "calibrate",
            "--set",
            "vx=1",
            "--set",
            "vy=1",
            "--set",
            "fidelity=1",
            "--out",
            "z",
        ],
    ));
    let z = json(&dir.path().join("z.calibration.json"));
    assert_eq!(z["noise"]["flip_x"].as_f64().unwrap(), 0.0);

    let o = atph(
        dir.path(),
        &[
            "calibrate",
            "--set",
            "vx=0.9",
            "--set",
            "vy=0.9",
            "--set",
            "fidelity=0.5",
            "--out",
            "bad",
        ],
    );
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("achievable fidelity"));
    assert!(!dir.path().join("bad.noise.conf").exists());
}

#[test]
fn plan_defaults_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = atph(dir.path(), &["plan", "--out", "p"]);
    ok(&o);
    assert!(String::from_utf8_lossy(&o.stdout).contains("min separation"));
    let r = json(&dir.path().join("p.plan.json"))["report"].clone();
    assert!((r["v_atat"].as_f64().unwrap() - 0.7396).abs() < 1e-12);
    assert!((r["min_separation"].as_f64().unwrap() - 149.896229).abs() < 1e-6);

    // plan file input, with a command-line override on top
    std::fs::write(dir.path().join("in.json"), r#"{"rep_rate": 1e6}"#).unwrap();
    ok(&atph(
        dir.path(),
        &[
            "plan",
            "--set",
            "input=in.json",
            "--set",
            "duty=0.5",
            "--out",
            "q",
        ],
    ));
    let q = json(&dir.path().join("q.plan.json"))["report"].clone();
    let ratio = q["duration"].as_f64().unwrap() / r["duration"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 1e-9);

    let o = atph(dir.path(), &["plan", "--set", "v_atph=0.5", "--out", "low"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("no violation"));
    assert!(!dir.path().join("low.plan.json").exists());
}

#[test]
fn config_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let o = atph(dir.path(), &["scan", "--set", "pionts=18"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("pionts"));
    let o = atph(dir.path(), &["scan", "--out", "missing/dir/x"]);
    assert!(!o.status.success());
    let o = atph(dir.path(), &["scan", "--config", "nope.conf"]);
    assert!(!o.status.success());
}
