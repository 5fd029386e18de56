use std::fs;
use std::process::{Command, Output};

use rdsplit::erroranalysis::parse_table1_csv;
use rdsplit::harness::{SnapshotMatrix, StudyTable, CSV_HEADER};

fn rdsplit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdsplit")).args(args).output().expect("binary runs")
}

fn last_stderr_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).trim_end().lines().last().unwrap_or_default().to_string()
}

#[test]
fn table1_to_stdout_parses() {
    let out = rdsplit(&["table1", "--D", "10", "--D", "0.01"]);
    assert!(out.status.success());
    let (ds, rows) = parse_table1_csv(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(ds, vec![10.0, 0.01]);
    assert_eq!(rows.len(), 6);
    // every term is homogeneous in D of degree one or two
    for (_, v) in rows {
        let ratio = v[0] / v[1];
        assert!((ratio / 1e3 - 1.0).abs() < 1e-9 || (ratio / 1e6 - 1.0).abs() < 1e-9);
    }
}

#[test]
fn converge_writes_csv_with_flags() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let out = rdsplit(&[
        "converge",
        "--preset",
        "linpot-low",
        "--orders",
        "2,4",
        "--dt-grid",
        "0.25,0.125,0.0625",
        "--reference-dt",
        "0.0078125",
        "--cache-dir",
        dir.path().join("cache").to_str().unwrap(),
        "--jobs",
        "1",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let table = StudyTable::from_csv(&text).unwrap();
    assert_eq!(table.records.len(), 6);
    assert!(String::from_utf8_lossy(&out.stderr).contains("strang: fitted order"));
    assert_eq!(fs::read_dir(dir.path().join("cache")).unwrap().count(), 2);
}

#[test]
fn efficiency_records_timings() {
    let out = rdsplit(&[
        "efficiency",
        "--preset",
        "gs-low",
        "--orders",
        "2",
        "--t-final",
        "1",
        "--dt-grid",
        "0.5,0.25",
        "--reference-dt",
        "0.125",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = StudyTable::from_csv(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(table.records.iter().all(|r| r.wall_seconds > 0.0));
}

#[test]
fn simulate_writes_both_species() {
    let dir = tempfile::tempdir().unwrap();
    let out = rdsplit(&[
        "simulate",
        "--preset",
        "gs-selfrep",
        "--t-final",
        "20",
        "--snapshot-stride",
        "5",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for s in ["u", "v"] {
        let m = SnapshotMatrix::from_csv(&fs::read_to_string(dir.path().join(format!("gs-selfrep-{s}.csv"))).unwrap())
            .unwrap();
        assert_eq!(m.times, vec![0.0, 5.0, 10.0, 15.0, 20.0]);
        assert_eq!(m.nodes.len(), 512);
    }
}

#[test]
fn scheme_save_and_validate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("o6.scheme");
    assert!(rdsplit(&["scheme", "--order", "6", "--save", path.to_str().unwrap()]).status.success());
    let out = rdsplit(&["scheme", "--file", path.to_str().unwrap(), "--validate"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("valid: 10 stages, nominal order 6"));
}

#[test]
fn inadmissible_file_needs_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("neg.scheme");
    let g1 = 1.0 / (2.0 - 2f64.cbrt());
    let g2 = 1.0 - 2.0 * g1;
    let stages = [(g1 / 2.0, g1), ((g1 + g2) / 2.0, g2), ((g1 + g2) / 2.0, g1), (g1 / 2.0, 0.0)];
    let mut text = String::from("order 4 name real-triple-jump\n");
    for (a, b) in stages {
        text += &format!("{a:e} 0 {b:e} 0\n");
    }
    fs::write(&path, text).unwrap();
    let refused = rdsplit(&["scheme", "--file", path.to_str().unwrap()]);
    assert_eq!(refused.status.code(), Some(2));
    assert!(last_stderr_line(&refused).starts_with("rdsplit-error code=2 kind=config"));
    let allowed = rdsplit(&["scheme", "--file", path.to_str().unwrap(), "--allow-inadmissible", "--print"]);
    assert!(allowed.status.success(), "{}", String::from_utf8_lossy(&allowed.stderr));
}

#[test]
fn missing_config_file_is_exit_2() {
    let out = rdsplit(&["--config", "/nonexistent/rdsplit.toml", "table1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(last_stderr_line(&out).contains("rdsplit.toml"));
}

#[test]
fn numerical_failure_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = rdsplit(&[
        "simulate",
        "--preset",
        "gs-chaos",
        "--nonlinear",
        "exact",
        "--t-final",
        "1",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(last_stderr_line(&out).starts_with("rdsplit-error code=3 kind=numerical"));
}
