use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use esn2::{
    det_scan, expected_info, sample_esn2, score, CubatureControls, Dataset, DpParams, RngSeed, SweepParam, SweepSpec,
};
use serde_json::Value;

fn esn2(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esn2")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(out)))
}

fn reference_csv() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/reference.csv")
}

fn write_dataset(data: &Dataset) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "y1,y2").unwrap();
    for (a, b) in data.iter() {
        writeln!(f, "{a:.17e},{b:.17e}").unwrap();
    }
    f.flush().unwrap();
    f
}

fn parse_csv_matrix(text: &str) -> Vec<Vec<f64>> {
    text.lines().map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect()
}

fn dp(theta: [f64; 8]) -> DpParams {
    DpParams::from_array(theta).unwrap()
}

#[test]
fn loglik_at_standard_point_is_minus_log_two_pi() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.csv");
    std::fs::write(&pts, "0,0\n").unwrap();
    let out = esn2(&["eval", "loglik", "--dp", "0,0,1,0,1,0,0,0", "--data", pts.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out)["value"].as_f64().unwrap();
    assert_eq!(v, -(2.0 * std::f64::consts::PI).ln().next_up());
    assert!((v + 1.837_877_066_409_345_3).abs() <= f64::EPSILON * 2.0);
}

#[test]
fn einfo_at_standard_point_has_zero_tau_entry() {
    let out = esn2(&["eval", "einfo", "--dp", "0,0,1,0,1,0,0,0"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["value"][7][7].as_f64(), Some(0.0));
    assert_eq!(v["converged"], Value::Bool(true));
}

#[test]
fn score_matches_library_bitwise() {
    let out = esn2(&["eval", "score", "--dp", "0,0,1,0.6,1,2,3,1", "--data", reference_csv().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let data = Dataset::new(vec![0.7, -0.4, 1.1], vec![-1.2, 0.5, 0.9]).unwrap();
    let expected = score(dp([0., 0., 1., 0.6, 1., 2., 3., 1.]), &data).unwrap().as_array();
    let got: Vec<f64> = json(&out)["value"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for (g, e) in got.iter().zip(expected) {
        assert_eq!(g.to_bits(), e.to_bits());
    }
    let csv = esn2(&[
        "eval",
        "score",
        "--dp",
        "0,0,1,0.6,1,2,3,1",
        "--data",
        reference_csv().to_str().unwrap(),
        "--format",
        "csv",
    ]);
    let row = &parse_csv_matrix(&stdout(&csv))[0];
    for (g, e) in row.iter().zip(expected) {
        assert_eq!(g.to_bits(), e.to_bits());
    }
}

#[test]
fn csv_matrices_round_trip_bit_exactly() {
    let theta = "0.3,-0.2,1.5,0.4,0.8,1.2,-0.7,0.6";
    let as_json = esn2(&["eval", "einfo", "--dp", theta]);
    let as_csv = esn2(&["eval", "einfo", "--dp", theta, "--format", "csv"]);
    let rows = parse_csv_matrix(&stdout(&as_csv));
    assert_eq!(rows.len(), 8);
    let info = expected_info(dp([0.3, -0.2, 1.5, 0.4, 0.8, 1.2, -0.7, 0.6]), CubatureControls::default()).unwrap();
    for r in 0..8 {
        assert_eq!(rows[r].len(), 8);
        for c in 0..8 {
            assert_eq!(rows[r][c].to_bits(), info.matrix.data[r][c].to_bits());
            assert_eq!(json(&as_json)["value"][r][c].as_f64().unwrap().to_bits(), info.matrix.data[r][c].to_bits());
        }
    }
}

#[test]
fn oinfo_and_density_and_moments() {
    let path = reference_csv();
    let out =
        esn2(&["eval", "oinfo", "--dp", "0,0,1,0.6,1,2,3,1", "--data", path.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(parse_csv_matrix(&stdout(&out)).len(), 8);
    let out = esn2(&["eval", "density", "--dp", "0,0,1,0.6,1,2,3,1", "--data", path.to_str().unwrap()]);
    assert_eq!(json(&out)["value"].as_array().unwrap().len(), 3);
    let out = esn2(&["eval", "moments", "--dp", "1,2,1,0,1,0,0,0"]);
    assert_eq!(json(&out)["mean"], serde_json::json!([1.0, 2.0]));
}

#[test]
fn parse_and_validation_errors_exit_2() {
    let cases: [&[&str]; 6] = [
        &["eval", "loglik", "--dp", "0,0,1,0,1,0,0,0"],
        &["eval", "einfo", "--dp", "0,0,1,0,1,0,0"],
        &["eval", "einfo", "--dp", "0,0,1,2,1,0,0,0"],
        &["eval", "einfo", "--dp", "0,0,1,0,1,0,0,0", "--tau", "1"],
        &["eval", "einfo", "--xi1", "0"],
        &["eval", "nonsense", "--dp", "0,0,1,0,1,0,0,0"],
    ];
    for args in cases {
        let out = esn2(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
    }
    let out = esn2(&["eval", "einfo", "--dp", "0,0,1,0,1,0,0,0", "--tau", "1"]);
    assert!(stderr(&out).contains("--tau"));
    let out = esn2(&["eval", "einfo", "--xi1", "0", "--xi2", "0", "--omega11", "1", "--omega12", "0"]);
    assert!(stderr(&out).contains("--omega22"));
}

#[test]
fn bad_input_rows_are_reported_by_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "y1,y2\n0,0\n1,NaN\n").unwrap();
    let out = esn2(&["eval", "loglik", "--dp", "0,0,1,0,1,0,0,0", "--data", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("row 3"), "{}", stderr(&out));
}

#[test]
fn det_scan_minimum_sits_at_zero() {
    let out = esn2(&[
        "det-scan",
        "--sweep",
        "alpha1",
        "--from",
        "-4",
        "--to",
        "4",
        "--points",
        "81",
        "--dp",
        "0,0,1,0,1,0,0,1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("param,value,det,min_eig,converged"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            assert_eq!(cells[0], "alpha1");
            assert_eq!(cells[4], "true");
            (cells[1].parse().unwrap(), cells[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 81);
    let argmin = rows.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert!(argmin.0.abs() < 1e-12, "{argmin:?}");
}

#[test]
fn det_scan_matches_library_and_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.csv");
    let out = esn2(&[
        "det-scan",
        "--sweep",
        "tau",
        "--from",
        "-2",
        "--to",
        "2",
        "--points",
        "5",
        "--xi1",
        "0",
        "--xi2",
        "0",
        "--omega11",
        "1",
        "--omega12",
        "0.3",
        "--omega22",
        "1",
        "--alpha1",
        "1",
        "--alpha2",
        "-2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    let spec = SweepSpec::linspace(SweepParam::Tau, -2.0, 2.0, 5, dp([0., 0., 1., 0.3, 1., 1., -2., 0.])).unwrap();
    let rows = det_scan(&spec, CubatureControls::default()).unwrap();
    for (line, row) in text.lines().skip(1).zip(&rows) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[2].parse::<f64>().unwrap().to_bits(), row.det.to_bits());
    }
}

#[test]
fn det_scan_edge_cases() {
    let out = esn2(&[
        "det-scan",
        "--sweep",
        "alpha1",
        "--from",
        "0.5",
        "--to",
        "0.5",
        "--points",
        "1",
        "--dp",
        "0,0,1,0,1,0,0,0",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 2);
    let out = esn2(&[
        "det-scan",
        "--sweep",
        "omega12",
        "--from",
        "0",
        "--to",
        "2",
        "--points",
        "3",
        "--dp",
        "0,0,1,0,1,0,0,0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out =
        esn2(&["det-scan", "--sweep", "tau", "--from", "0", "--to", "1", "--points", "0", "--dp", "0,0,1,0,1,0,0,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let args =
        ["det-scan", "--sweep", "alpha2", "--from", "-3", "--to", "3", "--points", "7", "--dp", "0,0,1,0.2,1,1,0,0.5"];
    let single = Command::new(env!("CARGO_BIN_EXE_esn2")).args(args).env("ESN2_THREADS", "1").output().unwrap();
    let auto = Command::new(env!("CARGO_BIN_EXE_esn2")).args(args).env("ESN2_THREADS", "0").output().unwrap();
    assert!(single.status.success() && auto.status.success());
    assert_eq!(single.stdout, auto.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_esn2")).args(args).env("ESN2_THREADS", "many").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn fit_recovers_simulated_parameters() {
    let truth = dp([0.0, 0.0, 1.0, 0.5, 1.0, 1.5, -1.0, 0.5]);
    let data = sample_esn2(truth, 10_000, RngSeed(77)).unwrap();
    let file = write_dataset(&data);
    let out = esn2(&["fit", "--data", file.path().to_str().unwrap(), "--dp", "0.2,-0.2,1.2,0.4,0.9,1,-0.6,0.2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["converged"], Value::Bool(true));
    let se = v["std_errors"].as_array().expect("standard errors present");
    for (k, t) in truth.to_array().iter().enumerate() {
        let est = v["dp_hat"][k].as_f64().unwrap();
        let s = se[k].as_f64().unwrap();
        assert!((est - t).abs() < 5.0 * s, "component {k}: {est} vs {t}, se {s}");
    }
}

#[test]
fn fit_starts_from_sample_moments_by_default() {
    let truth = dp([1.0, -1.0, 2.0, -0.4, 0.5, 2.0, 1.0, 0.0]);
    let data = sample_esn2(truth, 5_000, RngSeed(5)).unwrap();
    let file = write_dataset(&data);
    let out = esn2(&["fit", "--data", file.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(json(&out)["converged"], Value::Bool(true));
}

#[test]
fn fit_rejects_tiny_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("three.csv");
    std::fs::write(&path, "1,2\n3,4\n5,7\n").unwrap();
    let out = esn2(&["fit", "--data", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_at_singular_truth_reports_null_standard_errors() {
    let truth = dp([0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    let data = sample_esn2(truth, 2_000, RngSeed(11)).unwrap();
    let file = write_dataset(&data);
    let out = esn2(&["fit", "--data", file.path().to_str().unwrap()]);
    let v = json(&out);
    assert_eq!(out.status.code(), Some(0), "{v}");
    assert_eq!(v["std_errors"], Value::Null, "{v}");
    assert!(v["warning"].as_str().unwrap().contains("singular"));
}

#[test]
fn check_fast_passes_and_mutation_fails() {
    let start = Instant::now();
    let out = esn2(&["check", "--level", "fast"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(start.elapsed() < Duration::from_secs(60));
    assert!(stdout(&out).lines().any(|l| l.starts_with("PASS expected-info-vs-mc")));

    let out = esn2(&["check", "--level", "fast", "--perturb-i67", "0.05"]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stdout(&out).lines().any(|l| l.starts_with("FAIL expected-info-vs-mc")));
}

#[test]
fn einfo_budget_exhaustion_exits_3() {
    let out = esn2(&[
        "eval",
        "einfo",
        "--dp",
        "0,0,1,0.6,1,2,3,1",
        "--max-evals",
        "240",
        "--rel-tol",
        "1e-12",
        "--abs-tol",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["converged"], Value::Bool(false));
}

#[test]
fn fit_without_convergence_exits_4_with_json() {
    let data = sample_esn2(dp([0.0, 0.0, 1.0, 0.5, 1.0, 1.5, -1.0, 0.5]), 500, RngSeed(3)).unwrap();
    let file = write_dataset(&data);
    let out = esn2(&[
        "fit",
        "--data",
        file.path().to_str().unwrap(),
        "--dp",
        "0.2,-0.2,1.2,0.4,0.9,1,-0.6,0.2",
        "--max-iter",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let v = json(&out);
    assert_eq!(v["converged"], Value::Bool(false));
    assert!(v["warning"].as_str().unwrap().contains("did not converge"));
}
