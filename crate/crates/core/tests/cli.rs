use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use specpts_core::geometry::PointConfig;

fn specpts(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specpts"))
        .arg("run")
        .args(args)
        .arg("--out")
        .arg(out)
        .env("SPECPTS_THREADS", "2")
        .output()
        .unwrap()
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn sphere_simplex_reports_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = specpts(&["sphere-simplex", "--n", "4", "--f", "exp:2", "--objective", "trace"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS"), "{stdout}");
    let m = manifest(dir.path());
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert!(m["summary"]["max_d2_error"].as_f64().unwrap() < 1e-5);
}

#[test]
fn lattice_sweep_argmin_row_is_triangular() {
    let dir = tempfile::tempdir().unwrap();
    let o = specpts(&["lattice-sweep", "--objective", "trace", "--f", "exp:2", "--N", "10", "--grid", "41x41"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("a,b,value"));
    let best = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .min_by(|x, y| x[2].total_cmp(&y[2]))
        .unwrap();
    assert!((best[0] - 0.5).abs() < 1e-12 && (best[1] - 0.866).abs() < 1e-3, "{best:?}");
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = specpts(&["lattice-sweep", "--grid", "0x0"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.path().join("sweep.csv")).unwrap(), "a,b,value\n");
}

#[test]
fn interval_descends_from_the_triangular_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let o = specpts(&["interval", "--center", "0.85", "--width", "0.06", "--restarts", "1", "--max-iter", "300"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = &manifest(dir.path())["summary"];
    assert!(s["from_triangular"].as_f64().unwrap() < s["triangular"].as_f64().unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = specpts(&["lattice-sweep", "--N", "7"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(manifest(dir.path())["failure_stage"], "validate");

    let dir = tempfile::tempdir().unwrap();
    let o = specpts(&["dos", "--f", "1mexp:2"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let m = manifest(dir.path());
    assert_eq!(m["failure_stage"], "compute");
    assert_eq!(m["exit_code"], 3);

    let dir = tempfile::tempdir().unwrap();
    assert_eq!(specpts(&["no-such-experiment"], dir.path()).status.code(), Some(2));
    assert_eq!(specpts(&["dos", "--f", "exp:-1"], dir.path()).status.code(), Some(2));
}

#[test]
fn config_files_and_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"experiment":"moments","samples":64,"lattice":{"a":0.0,"b":1.0}}"#).unwrap();
    let out = dir.path().join("out");
    let o = specpts(&["--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("moments.csv")).unwrap();
    assert!(csv.starts_with("lattice,moment,closed_form,quadrature\n"));
    assert_eq!(csv.lines().count(), 5);

    fs::write(&cfg, r#"{"experiment":"moments","colour":"blue"}"#).unwrap();
    let o = specpts(&["--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["torus-opt", "--n", "16", "--restarts", "3", "--seed", "7", "--objective", "lambdamax"];
    assert_eq!(specpts(&args, a.path()).status.code(), Some(0));
    assert_eq!(specpts(&args, b.path()).status.code(), Some(0));
    for name in ["runs.csv", "best.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    assert_eq!(manifest(a.path())["summary"], manifest(b.path())["summary"]);
}

#[test]
fn trajectory_snapshots_reload() {
    let dir = tempfile::tempdir().unwrap();
    let o = specpts(&["trajectory", "--n", "16", "--stride", "5", "--max-iter", "20"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let first = dir.path().join("trajectory").join("run0_iter0.json");
    let c = PointConfig::from_json(&fs::read_to_string(first).unwrap()).unwrap();
    assert_eq!(c.n(), 16);
    assert!(dir.path().join("trajectory").join("run0_iter5.json").exists());
}

#[test]
fn dos_csv_mass_sums_to_cell_area() {
    let dir = tempfile::tempdir().unwrap();
    let o = specpts(&["dos", "--lattice", "triangular", "--samples", "64", "--bins", "30"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("dos_triangular.csv")).unwrap();
    let total: f64 = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - (2.0 * std::f64::consts::PI).powi(2)).abs() < 1e-10);
}

#[test]
fn bad_thread_setting_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_specpts"))
        .args(["run", "moments", "--out"])
        .arg(dir.path())
        .env("SPECPTS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
