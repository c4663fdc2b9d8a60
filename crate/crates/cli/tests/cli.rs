use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BOX: &str = r#"{"format": 1, "material": {"lambda": 1, "mu": 1, "rho": 1}, "domain": {"shape": "box", "lo": [0, 0], "hi": [1, 1]}}"#;
const DISK: &str = r#"{"format": 1, "speed": {"kind": "radial_affine", "a": 2, "b": -1}, "domain": {"shape": "disk", "radius": 1}}"#;

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elastic-lens")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn workdir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("box.json"), BOX).unwrap();
    std::fs::write(dir.path().join("disk.json"), DISK).unwrap();
    dir
}

#[test]
fn validate_reports_the_bad_node() {
    let dir = workdir();
    let ok = cli(dir.path(), &["validate", "--model", "box.json"]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    assert_eq!(stdout_json(&ok)["passed"], true);

    let bad = r#"{"format": 1, "domain": {"shape": "box", "lo": [0, 0], "hi": [1, 1]},
        "material": {"lambda": 1, "rho": 1, "mu": {"kind": "grid", "origin": [0, 0], "h": 0.25,
        "values": [[1,1,1,1,1],[1,1,1,1,1],[1,1,1,0,1],[1,1,1,1,1],[1,1,1,1,1]]}}}"#;
    std::fs::write(dir.path().join("bad.json"), bad).unwrap();
    let o = cli(dir.path(), &["validate", "--model", "bad.json", "--out", "report.json"]);
    assert_eq!(code(&o), 3);
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["passed"], false);
    let finding = &report["findings"][0];
    assert!(finding["message"].as_str().unwrap().contains("mu must be positive"));
    assert_eq!(finding["node"], serde_json::json!([3, 2]));
    assert!(dir.path().join("report.manifest.json").exists());
}

#[test]
fn malformed_model_names_the_location() {
    let dir = workdir();
    std::fs::write(dir.path().join("broken.json"), "{\"format\": 1,\n  \"domain\": }").unwrap();
    let o = cli(dir.path(), &["validate", "--model", "broken.json"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = workdir();
    std::fs::write(dir.path().join("cfg.json"), r#"{"model": "disk.json", "pionts": 4}"#).unwrap();
    let o = cli(dir.path(), &["lens", "--config", "cfg.json", "--out", "t.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("pionts"), "{}", stderr(&o));
    let o = cli(dir.path(), &["lens", "--model", "disk.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("out"), "{}", stderr(&o));
}

#[test]
fn flags_override_the_config_file() {
    let dir = workdir();
    std::fs::write(dir.path().join("cfg.json"), r#"{"model": "disk.json", "points": 4, "angles": 3, "out": "a.csv"}"#)
        .unwrap();
    let o = cli(dir.path(), &["lens", "--config", "cfg.json", "--points", "2", "--out", "b.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout_json(&o)["rows"], 6);
    assert!(!dir.path().join("a.csv").exists());
    let manifest = read_json(&dir.path().join("b.manifest.json"));
    assert_eq!(manifest["command"], "lens");
    assert_eq!(manifest["config"]["points"], 2);
    assert_eq!(manifest["config"]["angles"], 3);
    // defaults are materialized
    assert_eq!(manifest["config"]["fan"], 85.0);
    let digest = manifest["inputs"][0]["sha256"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
}

#[test]
fn foliation_check_exit_status() {
    let dir = workdir();
    let o = cli(dir.path(), &["check-foliation", "--model", "disk.json", "--foliation", "spheres", "--range", "0.1,1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout_json(&o)["verdict"], "strictly_convex");
    let o = cli(dir.path(), &["check-foliation", "--model", "box.json", "--foliation", "planes", "--mode", "s"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("foliation"), "{}", stderr(&o));
}

#[test]
fn simulation_errors_exit_with_five() {
    let dir = workdir();
    let o = cli(
        dir.path(),
        &["simulate", "--model", "box.json", "--source", "edge=left,center=0.5,width=0.2,f0=40,pol=1,0", "--receivers", "edge=right,count=2", "--h", "0.02", "--out", "tr"],
    );
    assert_eq!(code(&o), 5, "{}", stderr(&o));
}

#[test]
fn lens_tables_feed_extraction() {
    let dir = workdir();
    let o = cli(
        dir.path(),
        &[
            "simulate", "--model", "box.json", "--source", "edge=left,center=0.5,width=0.3,f0=4,pol=0.6,0.8",
            "--receivers", "edge=right,count=3", "--h", "0.02", "--T", "1.6", "--out", "traces",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("traces/manifest.json").exists());
    assert!(dir.path().join("traces/receiver_002.csv").exists());
    for m in ["p", "s"] {
        let out = format!("lens_{m}.csv");
        let o = cli(dir.path(), &["lens", "--model", "box.json", "--mode", m, "--points", "32", "--angles", "33", "--arc", "3,4", "--out", &out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let o = cli(dir.path(), &["extract", "--traces", "traces", "--lens", "lens_p.csv", "--lens-s", "lens_s.csv", "--out", "ex.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("ex.csv")).unwrap();
    assert!(text.starts_with("receiver_s,t_p,t_s,ell_p,ell_s,rel_err_p,rel_err_s,flags\n"));
    assert_eq!(text.lines().count(), 4);
    let summary = stdout_json(&o);
    assert_eq!(summary["receivers"], 3);
    assert!(summary["max_rel_err_p"].as_f64().unwrap() < 0.1, "{summary}");
    let manifest = read_json(&dir.path().join("ex.manifest.json"));
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 6);

    let o = cli(dir.path(), &["extract", "--traces", "missing"]);
    assert_eq!(code(&o), 6);
}

#[test]
fn invert_and_compare_round_trip() {
    let dir = workdir();
    std::fs::write(dir.path().join("p.json"), r#"{"model": "disk.json", "out": "run", "invert": {"rays": 48}}"#).unwrap();
    let o = cli(dir.path(), &["pipeline", "--config", "p.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = cli(dir.path(), &["invert", "--curve", "run/curve.csv", "--R", "1.0", "--mode", "radial", "--out", "profile.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("profile.manifest.json").exists());
    let o = cli(dir.path(), &["compare", "--profile", "profile.csv", "--truth", "disk.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = stdout_json(&o);
    assert!(report["max_rel_err"].as_f64().unwrap() < 0.01, "{report}");

    std::fs::write(dir.path().join("bent.csv"), "distance,time\n0.1,0.1\n0.2,0.19\n0.3,0.3\n").unwrap();
    let o = cli(dir.path(), &["invert", "--curve", "bent.csv"]);
    assert_eq!(code(&o), 7, "{}", stderr(&o));
}

fn small_pipeline(dir: &Path, out: &str) -> Output {
    let cfg = format!(
        r#"{{"model": "box.json", "out": "{out}",
            "lens": {{"points": 16, "angles": 17, "arc": [3, 4]}},
            "simulate": {{"source": {{"edge": "left", "center": 0.5, "width": 0.3, "f0": 4, "pol": [0.6, 0.8]}},
                          "receivers": {{"edge": "right", "count": 2}}, "h": 0.02, "t_end": 1.6}},
            "extract": {{}}}}"#
    );
    std::fs::write(dir.join(format!("{out}.json")), cfg).unwrap();
    cli(dir, &["pipeline", "--config", &format!("{out}.json")])
}

#[test]
fn pipeline_reruns_are_byte_identical() {
    let dir = workdir();
    for out in ["one", "two"] {
        let o = small_pipeline(dir.path(), out);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let report = read_json(&dir.path().join("one/report.json"));
    assert_eq!(report["passed"], true);
    let stages: Vec<&str> = report["stages"].as_array().unwrap().iter().map(|s| s["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["validate", "lens", "simulate", "extract"]);
    let mut csvs: Vec<_> = std::fs::read_dir(dir.path().join("one"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    csvs.sort();
    assert!(csvs.len() >= 5, "{csvs:?}");
    for name in csvs.iter().chain([&"report.json".to_string()]) {
        let a = std::fs::read(dir.path().join("one").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("two").join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
    let manifests = std::fs::read_dir(dir.path().join("one")).unwrap().filter(|e| {
        e.as_ref().unwrap().file_name().to_string_lossy().contains("manifest")
    });
    assert_eq!(manifests.count(), 1);
}

#[test]
fn failing_foliation_halts_before_simulation() {
    let dir = workdir();
    let cfg = r#"{"model": "box.json", "out": "run",
        "foliation": {"foliation": "planes", "mode": "p"},
        "simulate": {"source": {"edge": "left", "center": 0.5, "width": 0.3, "f0": 4, "pol": [1, 0]},
                     "receivers": {"edge": "right", "count": 2}, "h": 0.025}}"#;
    std::fs::write(dir.path().join("p.json"), cfg).unwrap();
    let o = cli(dir.path(), &["pipeline", "--config", "p.json"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("foliation stage failed"), "{}", stderr(&o));
    let run = dir.path().join("run");
    assert!(!run.join("run.json").exists());
    assert!(run.join("manifest.json").exists());
    let report = read_json(&run.join("report.json"));
    assert_eq!(report["passed"], false);
    assert_eq!(report["stages"].as_array().unwrap().len(), 1);
}

#[test]
fn pipeline_stops_on_an_invalid_model() {
    let dir = workdir();
    std::fs::write(
        dir.path().join("neg.json"),
        r#"{"format": 1, "speed": {"kind": "radial", "profile": [[0, 2], [0.5, -1], [1, 1]]}, "domain": {"shape": "disk", "radius": 1}}"#,
    )
    .unwrap();
    let o = cli(dir.path(), &["pipeline", "--model", "neg.json", "--out", "run"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert_eq!(read_json(&dir.path().join("run/validate.json"))["passed"], false);
}

#[test]
fn thread_count_comes_from_the_environment() {
    let dir = workdir();
    let o = Command::new(env!("CARGO_BIN_EXE_elastic-lens"))
        .current_dir(dir.path())
        .env("ELASTIC_LENS_THREADS", "2")
        .args(["lens", "--model", "disk.json", "--points", "4", "--angles", "3", "--out", "t.csv"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = Command::new(env!("CARGO_BIN_EXE_elastic-lens"))
        .current_dir(dir.path())
        .env("ELASTIC_LENS_THREADS", "many")
        .args(["lens", "--model", "disk.json", "--out", "t.csv"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn trace_writes_the_path() {
    let dir = workdir();
    let o = cli(dir.path(), &["trace", "--model", "disk.json", "--s", "0.3", "--angle", "-0.5", "--out", "path.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rec = stdout_json(&o);
    assert_eq!(rec["record"]["status"]["status"], "exited");
    let text = std::fs::read_to_string(dir.path().join("path.csv")).unwrap();
    assert!(text.starts_with("t,x,y,xi_x,xi_y\n"));
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[1].hypot(last[2]) - 1.0).abs() < 1e-9);
}
