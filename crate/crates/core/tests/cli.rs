use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kanlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kanlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

const VALIDATE: &str = r#"{
  "schema_version": 1,
  "system": { "family": "kan_cylinder", "k": 3, "eps": 0.5 },
  "operation": { "kind": "validate" }
}"#;

#[test]
fn validate_defaults_exit_zero_and_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "validate.json", VALIDATE);
    let out = tmp.path().join("out");
    let o = kanlab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&std::fs::read(out.join("validation.json")).unwrap()).unwrap();
    assert_eq!(v["all_passed"], true);
    let names: Vec<&str> = v["report"]["entries"].as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["K1", "K2", "K3", "K4"]);
    assert!(out.join("config.json").exists());
    assert_eq!(manifest(&out)["operation"], "validate");
}

#[test]
fn failing_conditions_are_data_not_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "eps0.json", &VALIDATE.replace("0.5", "0.0"));
    let out = tmp.path().join("out");
    let o = kanlab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&std::fs::read(out.join("validation.json")).unwrap()).unwrap();
    assert_eq!(v["all_passed"], false);
}

#[test]
fn missing_eps_is_config_error_naming_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", &VALIDATE.replace(r#", "eps": 0.5"#, ""));
    let o = kanlab(&["run", &cfg, "--out", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("system.eps"), "{err}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_field_and_missing_file_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "typo.json", &VALIDATE.replace(r#""operation""#, r#""opperation""#));
    let o = kanlab(&["run", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("opperation"));
    let o = kanlab(&["run", tmp.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numeric_failure_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    // 2^7 does not divide 96.
    let text = VALIDATE
        .replace(r#"{ "kind": "validate" }"#, r#"{ "kind": "intermingle", "scales": [7] }"#)
        .replace(r#""schema_version": 1,"#, r#""schema_version": 1, "grid": { "nx": 96, "ny": 96 },"#);
    let cfg = write_config(tmp.path(), "indivisible.json", &text);
    let o = kanlab(&["run", &cfg, "--out", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn basin_run_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let text = VALIDATE
        .replace(r#"{ "kind": "validate" }"#, r#"{ "kind": "basin", "scales": [3, 4, 5] }"#)
        .replace(r#""schema_version": 1,"#, r#""schema_version": 1, "grid": { "nx": 512, "ny": 512 },"#);
    let cfg = write_config(tmp.path(), "basin.json", &text);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(kanlab(&["run", &cfg, "--out", a.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(kanlab(&["--threads", "3", "run", &cfg, "--out", b.to_str().unwrap()]).status.code(), Some(0));
    for f in ["basin.ppm", "intermingling.csv", "fractions.csv", "basin.json", "config.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let ppm = std::fs::read(a.join("basin.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n512 512\n255\n"));
    let csv = std::fs::read_to_string(a.join("intermingling.csv")).unwrap();
    assert!(csv.starts_with("scale_j,mixed_fraction,mixed_count,total_boxes\n"));
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma["artifact_hash"], mb["artifact_hash"]);
    assert_eq!(ma["config_sha256"], mb["config_sha256"]);
}

#[test]
fn sweep_requires_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let text = VALIDATE.replace(
        r#"{ "kind": "validate" }"#,
        r#"{ "kind": "sweep", "mode": "boundary_preserving", "etas": [0.0, 0.02] }"#,
    );
    let cfg = write_config(tmp.path(), "sweep.json", &text);
    let o = kanlab(&["run", &cfg, "--out", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn small_sweep_writes_report_files() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{
      "schema_version": 1,
      "system": { "family": "kan_cylinder", "k": 3, "eps": 0.5 },
      "operation": { "kind": "sweep", "mode": "boundary_preserving", "etas": [0.0, 0.02], "scales": [2, 3] },
      "grid": { "nx": 64, "ny": 64 },
      "orbit": { "n_average": 5000 },
      "quadrature": { "circle_samples": 2048 },
      "seed": 11
    }"#;
    let cfg = write_config(tmp.path(), "sweep.json", text);
    let out = tmp.path().join("out");
    let o = kanlab(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["sweep.csv", "intermingling.csv", "report.json", "basin_eta_0p0000.ppm", "basin_eta_0p0200.ppm"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let m = manifest(&out);
    assert_eq!(m["seed"], 11);
    assert_eq!(m["artifacts"].as_array().unwrap().len(), 5);
    let report: Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["evidence_kind"], "finite-scale evidence");
    assert!(report.get("wall_clock_secs").is_none());
}

#[test]
fn schema_and_version() {
    let o = kanlab(&["schema"]);
    assert_eq!(o.status.code(), Some(0));
    let schema: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(schema["required"].as_array().unwrap().iter().any(|r| r == "system"));
    let o = kanlab(&["version"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), format!("kanlab {}", env!("CARGO_PKG_VERSION")));
}

#[test]
fn example_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        kanlab::cli::RunConfig::from_json(&text).unwrap();
        n += 1;
    }
    assert!(n >= 5);
}
