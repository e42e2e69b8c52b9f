use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

fn obslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_obslab"))
        .args(args)
        .env("OBSLAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_vec_pretty(cfg).unwrap()).unwrap();
    path
}

fn base(experiment: Value) -> Value {
    json!({
        "grid": {"x_min": -10.0, "x_max": 10.0, "n": 64},
        "potential": {"kind": "sine", "params": {"offset": 1.0, "amplitude": 1.0}},
        "thickset": {"kind": "periodic", "L": 1.0, "zeta": 0.3},
        "experiment": experiment
    })
}

fn run_into(cfg: &Path, out: &Path) -> Output {
    obslab(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(format!("{name}.json"))
}

#[test]
fn runs_are_byte_identical() {
    let dir = scratch("determinism");
    let cfg = write_config(
        &dir,
        &base(json!({"name": "obs-sweep", "sweeps": {"T": [0.2, 0.4, 0.8, 1.6]}})),
    );
    let (a, b) = (dir.join("a"), dir.join("b"));
    assert!(run_into(&cfg, &a).status.success());
    assert!(run_into(&cfg, &b).status.success());
    for name in ["run.json", "sweep.csv", "fit.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn manifest_lists_every_artifact_with_its_digest() {
    let dir = scratch("manifest");
    let cfg = write_config(
        &dir,
        &base(json!({"name": "heat-sweep", "sweeps": {"T": [0.2, 0.4, 0.8, 1.6]}})),
    );
    let out = dir.join("out");
    let res = run_into(&cfg, &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let manifest: Value = serde_json::from_slice(&fs::read(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "heat-sweep");
    assert_eq!(
        manifest["config_sha256"],
        hex::encode(Sha256::digest(fs::read(&cfg).unwrap()))
    );
    assert!(manifest["versions"]["obslab"].is_string() && manifest["versions"]["cli"].is_string());
    let listed: Vec<String> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| {
            let path = a["path"].as_str().unwrap();
            let bytes = fs::read(out.join(path)).unwrap();
            assert_eq!(a["bytes"], bytes.len());
            assert_eq!(a["sha256"], hex::encode(Sha256::digest(&bytes)));
            path.to_string()
        })
        .collect();
    let mut on_disk: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "run.json")
        .collect();
    on_disk.sort();
    let mut listed_sorted = listed.clone();
    listed_sorted.sort();
    assert_eq!(listed_sorted, on_disk);
}

#[test]
fn json_only_output_skips_csv() {
    let dir = scratch("formats");
    let mut cfg = base(json!({"name": "spectrum"}));
    cfg["output"] = json!({"formats": ["json"]});
    let cfg = write_config(&dir, &cfg);
    let out = dir.join("out");
    assert!(run_into(&cfg, &out).status.success());
    assert!(out.join("summary.json").exists());
    assert!(!out.join("spectrum.csv").exists());
}

#[test]
fn non_thick_explicit_set_exits_one() {
    let dir = scratch("nonthick");
    let mut cfg = base(json!({"name": "obs-sweep"}));
    cfg["thickset"] = json!({"kind": "explicit", "L": 2.0, "zeta": 0.3, "intervals": [[-10.0, -9.5], [0.0, 0.5]]});
    let cfg = write_config(&dir, &cfg);
    let res = run_into(&cfg, &dir.join("out"));
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("thick"));
    assert_eq!(obslab(&["validate", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn overlapping_intervals_exit_one() {
    let dir = scratch("structural");
    let mut cfg = base(json!({"name": "thickcheck"}));
    cfg["thickset"] = json!({"kind": "explicit", "L": 1.0, "zeta": 0.3, "intervals": [[0.0, 1.0], [0.5, 2.0]]});
    let cfg = write_config(&dir, &cfg);
    assert_eq!(run_into(&cfg, &dir.join("out")).status.code(), Some(1));
}

#[test]
fn lemmas_over_ten_seeds_exit_zero() {
    let dir = scratch("lemmas");
    let out = dir.join("out");
    let res = run_into(&example("lemmas"), &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let manifest: Value = serde_json::from_slice(&fs::read(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["verdict"], true);
    assert_eq!(manifest["summary"]["seeds"], json!([1, 2, 3, 4, 5, 6, 7, 8, 9, 10]));
    assert_eq!(manifest["summary"]["failed"], 0);
}

#[test]
fn failing_checks_exit_three() {
    let dir = scratch("failing");
    let cfg = base(json!({
        "name": "fbi", "T": 0.5, "sweeps": {"h": [0.1]},
        "tolerances": {"residual": 1e-30}
    }));
    let cfg = write_config(&dir, &cfg);
    let res = run_into(&cfg, &dir.join("out"));
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(dir.join("out").join("run.json").exists());
}

#[test]
fn stalled_solver_exits_two() {
    let dir = scratch("numerical");
    let cfg = base(json!({"name": "hum", "T": 0.5, "max_iter": 1, "tolerances": {"cg": 1e-12}}));
    let cfg = write_config(&dir, &cfg);
    let res = run_into(&cfg, &dir.join("out"));
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn list_names_every_kind() {
    let res = obslab(&["list", "--json"]);
    assert!(res.status.success());
    let kinds: Value = serde_json::from_slice(&res.stdout).unwrap();
    let names: Vec<&str> = kinds
        .as_array()
        .unwrap()
        .iter()
        .map(|k| k["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "spectrum",
            "thickcheck",
            "obs-sweep",
            "spectral-sweep",
            "heat-sweep",
            "highfreq",
            "hum",
            "fbi",
            "lemmas"
        ]
    );
    assert!(kinds
        .as_array()
        .unwrap()
        .iter()
        .all(|k| !k["description"].as_str().unwrap().is_empty()));
    let plain = String::from_utf8(obslab(&["list"]).stdout).unwrap();
    assert_eq!(plain.lines().count(), 9);
}

#[test]
fn flags_and_help() {
    assert_eq!(obslab(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(obslab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(obslab(&["--help"]).status.code(), Some(0));
    assert_eq!(obslab(&["--version"]).status.code(), Some(0));
}

#[test]
fn unknown_config_keys_and_missing_files_exit_one() {
    let dir = scratch("schema");
    let mut cfg = base(json!({"name": "spectrum"}));
    cfg["grid"]["spacing"] = json!(0.1);
    let cfg = write_config(&dir, &cfg);
    assert_eq!(obslab(&["validate", cfg.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(
        obslab(&["validate", dir.join("missing.json").to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    let bad = write_config(&dir, &base(json!({"name": "teleport"})));
    assert_eq!(obslab(&["validate", bad.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn bundled_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let res = obslab(&["validate", path.to_str().unwrap()]);
        assert!(
            res.status.success(),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&res.stderr)
        );
        count += 1;
    }
    assert_eq!(count, 9);
}

#[test]
fn hum_reports_endpoint_and_simulation_errors() {
    let dir = scratch("hum");
    let cfg = base(json!({"name": "hum", "T": 0.5, "steps": 2000, "seeds": [3]}));
    let cfg = write_config(&dir, &cfg);
    let out = dir.join("out");
    let res = run_into(&cfg, &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let manifest: Value = serde_json::from_slice(&fs::read(out.join("run.json")).unwrap()).unwrap();
    assert!(manifest["summary"]["max_endpoint_error"].as_f64().unwrap() <= 1e-6);
    assert!(manifest["summary"]["max_simulated_error"].as_f64().unwrap() <= 1e-3);
    assert!(out.join("control.csv").exists());
}
