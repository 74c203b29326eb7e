use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn conelab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conelab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn record(dir: &Path, prefix: &str) -> serde_json::Value {
    let path = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| {
            let name = p.file_name().unwrap().to_string_lossy();
            name.starts_with(prefix) && name.ends_with(".json")
        })
        .expect("json record");
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exponents_report_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = conelab(&["exponents", "--kappa", "3pi/2", "--p", "2"], dir.path());
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let rec = record(dir.path(), "exponents-");
    let lp = rec["metrics"]["lambda_plus"].as_f64().unwrap();
    assert!((lp - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(rec["config_hash"].as_str().unwrap().len(), 64);

    let infeasible = conelab(&["exponents", "--kappa", "3pi/2", "--p", "8", "--theta", "2", "--Theta", "2"], dir.path());
    assert_eq!(infeasible.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&infeasible.stdout).contains("infeasible"));

    let bad = conelab(&["exponents", "--kappa", "7"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    let both = conelab(&["exponents", "--kappa", "pi", "--alpha-cap", "pi/2"], dir.path());
    assert_eq!(both.status.code(), Some(2));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "kappa = \"pi/2\"\np = 3.0\n").unwrap();
    let out = dir.path().join("runs");
    let o = conelab(&["exponents", "--config", cfg.to_str().unwrap(), "--kappa", "pi"], &out);
    assert_eq!(o.status.code(), Some(0));
    let rec = record(&out, "exponents-");
    assert_eq!(rec["config"]["p"].as_f64(), Some(3.0));
    assert!((rec["metrics"]["lambda_plus"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    fs::write(&cfg, "kapa = 1.0\n").unwrap();
    let o = conelab(&["exponents", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = conelab(&["verify", "kernel-images", "--samples", "200", "--plot"], dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    let csv: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    assert_eq!(csv.len(), 1);
    let first = fs::read(&csv[0]).unwrap();
    conelab(&["verify", "kernel-images", "--samples", "200"], dir.path());
    assert_eq!(first, fs::read(&csv[0]).unwrap());
    assert!(fs::read_dir(dir.path()).unwrap().any(|e| e.unwrap().path().extension().is_some_and(|x| x == "svg")));

    let wrong = conelab(&["verify", "kernel-images", "--kappa", "3pi/2"], dir.path());
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn solve_and_kernel_table_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = conelab(
        &["solve", "--kappa", "3pi/2", "--n-r", "24", "--n-eta", "16", "--t-final", "0.2", "--dt", "0.05"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let names: Vec<String> =
        fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert!(names.iter().any(|n| n.starts_with("solve-field-")));
    assert!(record(dir.path(), "solve-")["metrics"]["final_max_abs"].as_f64().unwrap() > 0.0);

    let k = conelab(&["kernel-table", "--kappa", "pi/2", "--n-r", "5", "--n-eta", "4"], dir.path());
    assert_eq!(k.status.code(), Some(0));
    assert!(names.len() >= 3);
}

#[test]
fn sharpness_needs_opt_in_when_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let refused = conelab(&["sharpness"], dir.path());
    assert_eq!(refused.status.code(), Some(2));
    let o = conelab(&["sharpness", "--allow-infeasible"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("trend"));
}
