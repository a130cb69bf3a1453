use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dgnewton(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgnewton"))
        .args(args)
        .env_remove("DGNEWTON_THREADS")
        .output()
        .expect("binary runs")
}

fn summary(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).expect("summary written"))
        .expect("summary is JSON")
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn info_prints_json() {
    let out = dgnewton(&["info"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["name"], "dgnewton");
    assert_eq!(v["cases"].as_array().unwrap().len(), 4);
}

#[test]
fn mms_writes_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = dgnewton(&[
        "mms",
        "--levels",
        "4,8,16",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("mms.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,h,l2_error,h1_error,l2_rate,h1_rate");
    assert_eq!(lines.len(), 4);
    let last: Vec<f64> = lines[3].split(',').filter_map(|s| s.parse().ok()).collect();
    assert!((last[4] - 2.0).abs() < 0.2, "{csv}");
    let s = summary(&dir.path().join("mms_summary.json"));
    assert_eq!(s["status"], "converged");
    assert!(s["symmetry_defect"].as_f64().unwrap() < 1e-12);
}

#[test]
fn mms_rejects_unordered_levels() {
    let out = dgnewton(&["mms", "--levels", "8,4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "{\n  \"problem\": \"poisson\",\n  \"scheme\": \"cg\",\n  \"penalty\": 10\n}\n",
    );
    let out = dgnewton(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("unknown field `penalty`") && err.contains("line 4"),
        "{err}"
    );
}

#[test]
fn missing_config_file_exits_with_2() {
    let out = dgnewton(&["solve", "--config", "/nonexistent/run.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_thread_count_exits_with_2() {
    let out = Command::new(env!("CARGO_BIN_EXE_dgnewton"))
        .arg("info")
        .env("DGNEWTON_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_cap_is_reported() {
    let out = Command::new(env!("CARGO_BIN_EXE_dgnewton"))
        .arg("info")
        .env("DGNEWTON_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["threads"], 1);
}

#[test]
fn solve_writes_summary_trace_and_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{"problem": "plasticity", "scheme": "dg-hybrid", "mesh": {{"n": 6}}, "output_dir": "{}"}}"#,
        dir.path().display()
    );
    let cfg = write_config(dir.path(), &body);
    let out = dgnewton(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = summary(&dir.path().join("plasticity_dg-hybrid_n6_summary.json"));
    assert_eq!(s["status"], "converged");
    assert!(s["iterations"].as_u64().unwrap() > 0);
    assert!(s["final_residual"].as_f64().unwrap() < 1e-6);
    assert!(s["symmetry_defect"].as_f64().unwrap() < 1e-12);
    let outputs: Vec<&str> = s["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(
        outputs
            .iter()
            .any(|p| p.ends_with("plasticity_dg-hybrid_n6.vtk")),
        "{outputs:?}"
    );
    for p in &outputs {
        assert!(Path::new(p).exists(), "{p}");
    }
    let trace = fs::read_to_string(dir.path().join("plasticity_dg-hybrid_n6_trace.csv")).unwrap();
    assert!(
        trace.starts_with("step,iter,load_factor,residual_norm,increment_norm,symmetry_defect\n")
    );
    let vtk = fs::read_to_string(dir.path().join("plasticity_dg-hybrid_n6.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0\n"));
    assert!(vtk.contains("ASCII\nDATASET UNSTRUCTURED_GRID\n"));
}

#[test]
fn solve_reads_ascii_mesh_files() {
    let dir = tempfile::tempdir().unwrap();
    let mesh =
        "dim 2\nvertices 5\n0 0\n1 0\n1 1\n0 1\n0.5 0.5\ncells 4\n0 1 4\n1 2 4\n2 3 4\n3 0 4\n";
    fs::write(dir.path().join("square.mesh"), mesh).unwrap();
    let body = format!(
        r#"{{"problem": "poisson", "scheme": "nitsche", "mesh": {{"file": "square.mesh"}}, "output_dir": "{}"}}"#,
        dir.path().display()
    );
    let cfg = write_config(dir.path(), &body);
    let out = dgnewton(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = summary(&dir.path().join("poisson_nitsche_n4_summary.json"));
    assert_eq!(s["n"], 4);
    assert_eq!(s["status"], "converged");
}

#[test]
fn malformed_mesh_file_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.mesh"), "dim 2\nvertices 1\n0 0 0\n").unwrap();
    let body = format!(
        r#"{{"problem": "poisson", "scheme": "cg", "mesh": {{"file": "bad.mesh"}}, "output_dir": "{}"}}"#,
        dir.path().display()
    );
    let cfg = write_config(dir.path(), &body);
    let out = dgnewton(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_with_1_and_keeps_trace() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{"problem": "plasticity", "scheme": "dg-hybrid", "mesh": {{"n": 6}},
            "newton": {{"max_iter": 1, "max_halvings": 0}}, "output_dir": "{}"}}"#,
        dir.path().display()
    );
    let cfg = write_config(dir.path(), &body);
    let out = dgnewton(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = summary(&dir.path().join("plasticity_dg-hybrid_n6_summary.json"));
    assert_eq!(s["status"], "non-convergence");
    assert!(dir
        .path()
        .join("plasticity_dg-hybrid_n6_trace.csv")
        .exists());
}

#[test]
fn case_both_reports_dg_cg_difference() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = dgnewton(&[
        "case",
        "twist",
        "--method",
        "both",
        "--n",
        "2",
        "--output-dir",
        d,
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "twist_cg_n2.vtk",
        "twist_dg_n2.vtk",
        "twist_dg_n2_exploded.vtk",
        "twist_both_n2_summary.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let s = summary(&dir.path().join("twist_both_n2_summary.json"));
    let diff = s["dg_cg_l2_diff"].as_f64().unwrap();
    assert!(diff.is_finite() && diff > 0.0 && diff < 0.5, "{diff}");
    assert_eq!(s["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn unknown_case_exits_with_2() {
    let out = dgnewton(&["case", "shear"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn deterministic_runs_write_identical_traces() {
    let traces: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let out = dgnewton(&[
                "case",
                "plasticity",
                "--n",
                "8",
                "--deterministic",
                "--output-dir",
                dir.path().to_str().unwrap(),
            ]);
            assert_eq!(out.status.code(), Some(0));
            fs::read(dir.path().join("plasticity_dg_n8_trace.csv")).unwrap()
        })
        .collect();
    assert!(!traces[0].is_empty());
    assert_eq!(traces[0], traces[1]);
}
