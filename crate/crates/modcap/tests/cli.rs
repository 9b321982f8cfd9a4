use std::path::Path;
use std::process::{Command, Output};

use modcap::commands::MetricsFile;
use modcap::commands::{
    BUNDLE_FILE, METRICS_FILE, MOBILITY_CSV, TELEMETRY_FILE, TREE_FILE, VPAMSP_CSV, VSS_CSV,
};
use modcap::io::{
    read_bundle, read_csv, read_json, read_telemetry, MobilityRow, TreeExport, VpamspRow, VssRow,
};
use modcap_core::sddip::RunStatus;

fn modcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modcap"))
        .args(args)
        .env_remove("MODCAP_BACKEND")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_round_trips_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    ok(&modcap(&["generate", "--seed", "4", "-o", p(&a)]));
    let text = std::fs::read_to_string(&a).unwrap();
    let inst = modcap::io::parse_instance(&text).unwrap();
    assert_eq!(modcap::io::instance_to_string(&inst), text);
    // Same settings, same bytes.
    assert_eq!(ok(&modcap(&["generate", "--seed", "4"])), text);
}

#[test]
fn se_preset_size() {
    let text = ok(&modcap(&["generate", "--preset", "se"]));
    let inst = modcap::io::parse_instance(&text).unwrap();
    assert_eq!(inst.n_facilities(), 7);
    assert_eq!(inst.n_locations(), 50);
}

#[test]
fn bad_spec_names_the_field() {
    let out = modcap(&["generate", "--facilities", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_facilities"));
}

#[test]
fn unknown_backend_is_an_environment_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_modcap"))
        .args(["solve", "-o", p(dir.path())])
        .env("MODCAP_BACKEND", "cplex")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MODCAP_BACKEND"));
}

#[test]
fn invalid_config_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = modcap(&["solve", "--samples", "1", "-o", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let out = modcap(&[
        "solve",
        "--instance",
        p(&dir.path().join("missing.json")),
        "-o",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_with_oracle_writes_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ok(&modcap(&[
        "solve",
        "--samples",
        "10000",
        "--with-oracle",
        "--preset",
        "sim-i",
        "-o",
        p(&run),
    ]));
    let b = read_bundle(&run.join(BUNDLE_FILE)).unwrap();
    assert_eq!(b.result.status, RunStatus::Converged);
    let o = b.oracle.unwrap();
    assert!(o.lb_gap_to_oracle.abs() <= 0.01, "{o:?}");
    assert!(b.result.census.keys().all(|k| k == "SIM" || k == "I"));
    let tele = read_telemetry(&run.join(TELEMETRY_FILE)).unwrap();
    assert_eq!(tele.len(), b.result.iterations);
    assert_eq!(tele, b.result.history);
    let tree: TreeExport = read_json(&run.join(TREE_FILE)).unwrap();
    assert_eq!(tree.nodes.len(), 7);
}

#[test]
fn single_family_preset() {
    let dir = tempfile::tempdir().unwrap();
    ok(&modcap(&[
        "solve",
        "--preset",
        "b",
        "--max-iterations",
        "3",
        "-o",
        p(dir.path()),
    ]));
    let b = read_bundle(&dir.path().join(BUNDLE_FILE)).unwrap();
    assert!(b.result.census.keys().all(|k| k == "B"));
    assert!(b.result.iterations <= 3);
}

#[test]
fn time_limit_reports_limit_with_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let se = dir.path().join("se.json");
    ok(&modcap(&["generate", "--preset", "se", "-o", p(&se)]));
    let run = dir.path().join("run");
    ok(&modcap(&[
        "solve",
        "--instance",
        p(&se),
        "--samples",
        "50",
        "--time-limit",
        "1",
        "-o",
        p(&run),
    ]));
    let b = read_bundle(&run.join(BUNDLE_FILE)).unwrap();
    assert_eq!(b.result.status, RunStatus::TimeLimit);
    assert!(b.result.lower_bound.is_finite() && b.result.upper_bound.is_finite());
    let text = std::fs::read_to_string(run.join(BUNDLE_FILE)).unwrap();
    assert!(text.contains("\"status\": \"limit\""));
}

#[test]
fn revision_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    ok(&modcap(&[
        "metrics",
        "--instance-seed",
        "2",
        "--tree-seed",
        "2",
        "--revisions",
        "1,3",
        "-o",
        p(dir.path()),
    ]));
    let rows: Vec<VpamspRow> = read_csv(&dir.path().join(VPAMSP_CSV)).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].vpamsp_pct, Some(0.0));
    assert_eq!(rows[1].vpamsp_pct, Some(100.0));
    assert_eq!(rows[1].revision_points, "1,2,3");
}

#[test]
fn explicit_schedules() {
    let dir = tempfile::tempdir().unwrap();
    ok(&modcap(&[
        "metrics",
        "--schedules",
        "1,3;1,2",
        "-o",
        p(dir.path()),
    ]));
    let rows: Vec<VpamspRow> = read_csv(&dir.path().join(VPAMSP_CSV)).unwrap();
    let pts: Vec<&str> = rows.iter().map(|r| r.revision_points.as_str()).collect();
    assert_eq!(pts, ["1,3", "1,2"]);
    let out = modcap(&["metrics", "--schedules", "2,3", "-o", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn vss_vanishes_on_a_single_branch() {
    let dir = tempfile::tempdir().unwrap();
    ok(&modcap(&[
        "metrics",
        "--vss",
        "--branching",
        "1",
        "-o",
        p(dir.path()),
    ]));
    let rows: Vec<VssRow> = read_csv(&dir.path().join(VSS_CSV)).unwrap();
    assert!(rows[0].vss_t.abs() <= 1e-6 * rows[0].rp);
    assert_eq!(rows[0].provenance, "oracle");
}

#[test]
fn mobility_columns_add_up() {
    let dir = tempfile::tempdir().unwrap();
    ok(&modcap(&[
        "metrics",
        "--mobility",
        "--instance-seed",
        "3",
        "-o",
        p(dir.path()),
    ]));
    let rows: Vec<MobilityRow> = read_csv(&dir.path().join(MOBILITY_CSV)).unwrap();
    let r = &rows[0];
    assert_eq!(r.vmm, r.vmod + r.vmob);
    assert_eq!(r.vmod, r.z_static - r.z_mod_only);
    let m: MetricsFile = read_json(&dir.path().join(METRICS_FILE)).unwrap();
    assert_eq!(m.files, vec![MOBILITY_CSV.to_string()]);
}

#[test]
fn metrics_needs_a_suite() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        modcap(&["metrics", "-o", p(dir.path())]).status.code(),
        Some(1)
    );
}

#[test]
fn dumps() {
    let tree: TreeExport =
        serde_json::from_str(&ok(&modcap(&["dump-tree", "--branching", "3"]))).unwrap();
    assert_eq!(tree.nodes.len(), 1 + 3 + 9);
    assert!(tree
        .edges
        .iter()
        .all(|e| (e.probability - 1.0 / 3.0).abs() < 1e-12));
    let lp = ok(&modcap(&["dump-model", "--form", "stage", "--stage", "2"]));
    assert!(lp.starts_with("\\ model stage2") && lp.contains("Subject To"));
    let lp = ok(&modcap(&["dump-model"]));
    assert!(lp.contains("Binaries") || lp.contains("Generals"));
    assert_eq!(
        modcap(&["dump-model", "--form", "stage", "--stage", "9"])
            .status
            .code(),
        Some(1)
    );
}
