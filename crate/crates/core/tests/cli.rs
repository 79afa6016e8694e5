use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn adiabat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adiabat"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("ADIABAT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn derive_ideal_gas_temperature_matches_theta() {
    let dir = TempDir::new().unwrap();
    let o = adiabat(dir.path(), &["derive", "ideal_reduced", "--grid", "17"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = rows(&dir.path().join("ideal_reduced_temperature.csv"));
    assert_eq!(t.len(), 17);
    for r in &t {
        assert!((r[1] - r[0]).abs() <= 1e-8 * r[0], "{r:?}");
    }
    let s = rows(&dir.path().join("ideal_reduced_entropy.csv"));
    assert_eq!(s.len(), 17 * 17);
    assert!(s.iter().all(|r| r.len() == 4));
}

#[test]
fn derive_vdw_entropy_is_concave_in_energy() {
    let dir = TempDir::new().unwrap();
    let o = adiabat(dir.path(), &["derive", "vdw_reduced", "--grid", "21"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = rows(&dir.path().join("vdw_reduced_entropy.csv"));
    // rows are ordered theta-major, so a fixed V column is every 21st row
    for j in 0..21 {
        let col: Vec<(f64, f64)> = s.iter().skip(j).step_by(21).map(|r| (r[2], r[3])).collect();
        for w in col.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            let chord = a.1 + (c.1 - a.1) * (b.0 - a.0) / (c.0 - a.0);
            assert!(b.1 >= chord - 1e-9 * chord.abs().max(1.0), "column {j}: {w:?}");
        }
    }
}

#[test]
fn missing_registry_names_the_path() {
    let dir = TempDir::new().unwrap();
    let o = adiabat(dir.path(), &["derive", "ideal_reduced", "--registry", "no/such/registry.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no/such/registry.json"));
}

#[test]
fn reconstruct_reports_references_midpoint_and_beyond() {
    let dir = TempDir::new().unwrap();
    let targets = dir.path().join("targets.csv");
    // s = 1.5 ln U + ln V here, so U = 1.5 sqrt(2) sits halfway between the references
    let mid = 1.5 * 2f64.powf(0.5);
    fs::write(&targets, format!("U,V\n1.5,1\n3,1\n{mid},1\n6,1\n")).unwrap();
    let o = adiabat(
        dir.path(),
        &["reconstruct", "ideal_reduced", "--x0", "1.5,1", "--x1", "3,1", "--targets", targets.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = rows(&dir.path().join("ideal_reduced_reconstruct.csv"));
    let lambda = |i: usize| 0.5 * (r[i][2] + r[i][3]);
    assert!(lambda(0).abs() < 1e-3);
    assert!((lambda(1) - 1.0).abs() < 1e-3);
    assert!((lambda(2) - 0.5).abs() < 1e-3, "{:?}", r[2]);
    assert!(lambda(3) > 1.0);
    for row in &r {
        assert!(row[4] <= 2e-4);
        assert!((0.5 * (row[2] + row[3]) - row[5]).abs() < 1e-3);
    }
}

#[test]
fn reconstruct_refuses_unordered_references() {
    let dir = TempDir::new().unwrap();
    let targets = dir.path().join("targets.csv");
    fs::write(&targets, "2,1\n").unwrap();
    let o = adiabat(
        dir.path(),
        &["reconstruct", "ideal_reduced", "--x0", "3,1", "--x1", "1.5,1", "--targets", targets.to_str().unwrap()],
    );
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn verify_full_suite_passes_and_writes_reports() {
    let dir = TempDir::new().unwrap();
    let o = adiabat(dir.path(), &["verify", "--seed", "42"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify_report.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 42);
    assert!(json["laws"].as_array().unwrap().len() > 20);
    assert!(fs::read_to_string(dir.path().join("verify_report.txt")).unwrap().contains("PASS"));
}

#[test]
fn verify_with_injected_stub_fails_with_witness() {
    let dir = TempDir::new().unwrap();
    let o = adiabat(dir.path(), &["verify", "--suite", "general", "--inject", "transitivity-hole"]);
    assert_eq!(code(&o), 1);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify_report.json")).unwrap()).unwrap();
    let a2 = json["laws"]
        .as_array()
        .unwrap()
        .iter()
        .find(|l| l["law"].as_str().unwrap().starts_with("A2") && l["status"] == "FAIL")
        .expect("transitivity fails");
    assert_eq!(a2["witness"]["states"].as_array().unwrap().len(), 3);
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&adiabat(dir.path(), &["verify", "--suite", "bogus"])), 64);
    assert_eq!(code(&adiabat(dir.path(), &["frobnicate"])), 64);
    assert_eq!(code(&adiabat(dir.path(), &["trace", "ideal_reduced", "adiabat", "--start", "1,1", "--to", "2", "--tol", "-1"])), 64);
}

#[test]
fn calibrate_empty_graph_gives_zero_constants() {
    let dir = TempDir::new().unwrap();
    let graph = dir.path().join("graph.json");
    fs::write(&graph, r#"{"processes":[]}"#).unwrap();
    let o = adiabat(dir.path(), &["calibrate", "--graph", graph.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("calibration.json")).unwrap()).unwrap();
    let constants = json["assignment"]["constants"].as_object().unwrap();
    assert!(!constants.is_empty());
    assert!(constants.values().all(|b| b.as_f64() == Some(0.0)));
}

#[test]
fn calibrate_mixing_demo_passes_monotonicity() {
    let dir = TempDir::new().unwrap();
    let o = adiabat(
        dir.path(),
        &[
            "calibrate",
            "--registry",
            data("mixing_registry.json").to_str().unwrap(),
            "--graph",
            data("mixing_graph.json").to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("monotonicity: PASS"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("calibration.json")).unwrap()).unwrap();
    let inc = json["monotonicity"]["processes"][0]["increase"].as_f64().unwrap();
    assert!((inc - 2.0 * std::f64::consts::LN_2).abs() < 1e-6);
    // the mixture cannot be unmixed, so the reverse entry is infinite
    assert!(json["mismatch"]["f"][1][0].is_null() || json["mismatch"]["f"][0][1].is_null());
}

#[test]
fn calibrate_negative_cycle_exits_with_the_cycle() {
    let dir = TempDir::new().unwrap();
    let graph = dir.path().join("graph.json");
    // each process compresses at fixed energy and so loses entropy
    fs::write(
        &graph,
        r#"{"processes":[
            {"id":"squeeze","source":[{"space":"gas_a","scale":1,"U":1.5,"V":1}],
             "target":[{"space":"mixture","scale":1,"U":1.5,"V":0.25}]},
            {"id":"back","source":[{"space":"mixture","scale":1,"U":1.5,"V":1}],
             "target":[{"space":"gas_a","scale":1,"U":1.5,"V":0.25}]}
        ]}"#,
    )
    .unwrap();
    let o = adiabat(
        dir.path(),
        &["calibrate", "--registry", data("mixing_registry.json").to_str().unwrap(), "--graph", graph.to_str().unwrap()],
    );
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("negative cycle") && err.contains("gas_a:1") && err.contains("mixture:1"), "{err}");
}

#[test]
fn trace_adiabat_of_ideal_gas() {
    let dir = TempDir::new().unwrap();
    let o = adiabat(dir.path(), &["trace", "ideal_reduced", "adiabat", "--start", "1,1", "--to", "8"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let path = dir.path().join("ideal_reduced_adiabat.csv");
    assert!(fs::read_to_string(&path).unwrap().starts_with("V,U,P,S,T\n"));
    let r = rows(&path);
    assert_eq!(r.len(), 101);
    let last = r.last().unwrap();
    assert_eq!(last[0], 8.0);
    assert!((last[1] - 0.25).abs() <= 1e-9 * 0.25, "{last:?}");
    for row in &r {
        assert!((row[1] * row[0].powf(2.0 / 3.0) - 1.0).abs() < 1e-9);
        assert!((row[3] - r[0][3]).abs() < 1e-8);
    }
}

#[test]
fn trace_zero_length_range_is_one_row() {
    let dir = TempDir::new().unwrap();
    let o = adiabat(dir.path(), &["trace", "ideal_reduced", "isotherm", "--start", "1.5,2", "--to", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(rows(&dir.path().join("ideal_reduced_isotherm.csv")).len(), 1);
}

#[test]
fn trace_leaving_the_domain_reports_the_exit_point() {
    let dir = TempDir::new().unwrap();
    let o = adiabat(dir.path(), &["trace", "ideal_reduced", "adiabat", "--start", "1,1", "--to", "5000"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("left the domain at"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        let o = adiabat(dir.path(), &["trace", "vdw_reduced", "adiabat", "--start", "4,3", "--to", "9"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let o = adiabat(dir.path(), &["verify", "--suite", "general,ch", "--samples", "10", "--seed", "9"]);
        assert_eq!(code(&o), 0);
    }
    for f in ["vdw_reduced_adiabat.csv", "verify_report.json", "verify_report.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
