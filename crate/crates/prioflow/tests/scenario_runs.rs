//! Scenario files end to end through the CLI binary: document loading,
//! report emission, process-level determinism, and exit codes.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use prioflow::scenario::load_bundle;

const TOPOLOGY: &str = r#"{
  "sites": [{"name": "CERN"}, {"name": "FNAL"}],
  "links": [{"a": "CERN", "b": "FNAL", "capacity_gbps": 1250.0, "manageable_fraction": 0.8}]
}"#;

fn rse_doc(name: &str, site: &str, base: u32) -> String {
    serde_json::json!({
        "name": name,
        "site": site,
        "server_count": 10,
        "endpoints": [{
            "protocol": "webdavs",
            "host": format!("redirector.{}", site.to_lowercase()),
            "namespace_prefix": "/cms",
            "preferences": ["third-party-transfer", "write"]
        }],
        "directors": [
            {"id": "d1", "ipv6_subnet": format!("2001:db8:{base}:1::/64"), "endpoint_host": format!("d1.{}", site.to_lowercase())},
            {"id": "d2", "ipv6_subnet": format!("2001:db8:{base}:2::/64"), "endpoint_host": format!("d2.{}", site.to_lowercase())}
        ]
    })
    .to_string()
}

fn write_inputs(dir: &Path, scenario: &str) {
    fs::write(dir.join("topo.json"), TOPOLOGY).unwrap();
    fs::write(dir.join("cern.json"), rse_doc("RSE_CERN", "CERN", 1)).unwrap();
    fs::write(dir.join("fnal.json"), rse_doc("RSE_FNAL", "FNAL", 2)).unwrap();
    fs::write(dir.join("scenario.json"), scenario).unwrap();
}

fn good_scenario() -> String {
    serde_json::json!({
        "topology": "topo.json",
        "rses": ["cern.json", "fnal.json"],
        "seed": 7,
        "run_until": 20000.0,
        "timeline": [
            {"t": 0.0, "action": "submit", "request_id": "df1", "bytes": 2_000_000_000_000_000u64,
             "src": "CERN", "dst": "FNAL", "priority": 1, "file_count": 16},
            {"t": 100.0, "action": "update_priority", "request_id": "df1", "priority": 3},
            {"t": 200.0, "action": "update_priority", "request_id": "df1", "priority": 1}
        ],
        "checkpoints": [500.0]
    })
    .to_string()
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_prioflow"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stdout).into_owned(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

#[test]
fn run_emits_artifacts_and_is_deterministic_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), &good_scenario());
    let scenario = dir.path().join("scenario.json");

    let out_a = dir.path().join("out_a");
    let out_b = dir.path().join("out_b");
    for out in [&out_a, &out_b] {
        let (code, stdout, stderr) = run_cli(&[
            "run",
            "--scenario",
            scenario.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "stdout: {stdout} stderr: {stderr}");
        assert!(stdout.contains("audit cap-reserve: ok"), "{stdout}");
    }

    for name in ["report.json", "rates.csv", "links.csv", "site_CERN.cfg", "site_FNAL.cfg"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across processes");
        assert!(!a.is_empty());
    }

    // The single 2 PB flow at 1000 Gbps manageable finishes at 16000 s.
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("report.json")).unwrap()).unwrap();
    let completions = report["completions"].as_array().unwrap();
    assert_eq!(completions.len(), 1);
    let t = completions[0]["t"].as_f64().unwrap();
    assert!((t - 16000.0).abs() / 16000.0 < 0.01, "{t}");
    let csv = fs::read_to_string(out_a.join("rates.csv")).unwrap();
    assert!(csv.starts_with("time,service_id,rate_gbps\n"));
    assert!(csv.lines().count() > 1);
}

#[test]
fn seed_override_changes_report_seed_only() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), &good_scenario());
    let scenario = dir.path().join("scenario.json");
    let out = dir.path().join("out");
    let (code, _, _) = run_cli(&[
        "run",
        "--scenario",
        scenario.to_str().unwrap(),
        "--seed",
        "99",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 99);
}

#[test]
fn unexpected_failures_exit_nonzero() {
    // A fault-injected scenario without expect_failures must fail the run.
    let dir = tempfile::tempdir().unwrap();
    let scenario = serde_json::json!({
        "topology": "topo.json",
        "rses": ["cern.json", "fnal.json"],
        "seed": 7,
        "run_until": 100.0,
        "timeline": [
            {"t": 0.0, "action": "submit", "request_id": "df1", "bytes": 100_000_000_000u64,
             "src": "CERN", "dst": "FNAL", "priority": 1, "file_count": 1}
        ],
        "faults": [
            {"t": 0.1, "dataflow": "df1", "job_index": 0},
            {"t": 0.2, "dataflow": "df1", "job_index": 0},
            {"t": 0.3, "dataflow": "df1", "job_index": 0},
            {"t": 0.4, "dataflow": "df1", "job_index": 0}
        ]
    })
    .to_string();
    write_inputs(dir.path(), &scenario);
    let out = dir.path().join("out");
    let (code, stdout, _) = run_cli(&[
        "run",
        "--scenario",
        dir.path().join("scenario.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "{stdout}");
    // The report still lands, with the failure surfaced.
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["failed_jobs"].as_array().unwrap().len(), 1);
    assert_eq!(report["failed_jobs"][0]["retries"], 4);
}

#[test]
fn invalid_references_fail_before_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = serde_json::json!({
        "topology": "topo.json",
        "rses": ["cern.json", "fnal.json"],
        "seed": 7,
        "run_until": 100.0,
        "timeline": [
            {"t": 0.0, "action": "update_priority", "request_id": "ghost", "priority": 5}
        ]
    })
    .to_string();
    write_inputs(dir.path(), &scenario);
    let out = dir.path().join("out");
    let (code, _, stderr) = run_cli(&[
        "run",
        "--scenario",
        dir.path().join("scenario.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("before any submit"), "{stderr}");
    assert!(!out.join("report.json").exists(), "no simulation ran");
}

#[test]
fn parse_errors_carry_location() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), "{\n  \"topology\": 3,\n}");
    let (code, _, stderr) = run_cli(&[
        "run",
        "--scenario",
        dir.path().join("scenario.json").to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("line"), "{stderr}");
}

#[test]
fn validate_subcommand_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), &good_scenario());
    let (code, stdout, _) = run_cli(&[
        "validate",
        "--topology",
        dir.path().join("topo.json").to_str().unwrap(),
        "--rses",
        dir.path().to_str().unwrap(),
    ]);
    // The tempdir holds scenario.json too, which is not an RSE document.
    assert_eq!(code, 1, "{stdout}");

    let rse_dir = dir.path().join("rses");
    fs::create_dir(&rse_dir).unwrap();
    fs::copy(dir.path().join("cern.json"), rse_dir.join("cern.json")).unwrap();
    fs::copy(dir.path().join("fnal.json"), rse_dir.join("fnal.json")).unwrap();
    let (code, stdout, _) = run_cli(&[
        "validate",
        "--topology",
        dir.path().join("topo.json").to_str().unwrap(),
        "--rses",
        rse_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("2 rses"), "{stdout}");

    let bad_topo = dir.path().join("bad.json");
    fs::write(
        &bad_topo,
        r#"{"sites": [{"name": "A"}], "links": [{"a": "A", "b": "X", "capacity_gbps": 1.0}]}"#,
    )
    .unwrap();
    let (code, _, stderr) = run_cli(&["validate", "--topology", bad_topo.to_str().unwrap()]);
    assert_eq!(code, 1, "{stderr}");
    assert!(stderr.contains("dangling"), "{stderr}");
}

#[test]
fn bundle_loader_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), &good_scenario());
    let bundle = load_bundle(&dir.path().join("scenario.json")).unwrap();
    assert_eq!(bundle.topology.sites.len(), 2);
    assert_eq!(bundle.rses.len(), 2);
    assert_eq!(bundle.scenario.timeline.len(), 3);
}
