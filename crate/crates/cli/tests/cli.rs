use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_valley-qed"));
    c.env_remove("VALLEY_QED_OUTPUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn repo_config(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn list_scenarios_names_all_five() {
    let o = run(&["list-scenarios"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    for name in ["bands", "bulk", "ribbon", "chiral", "custom"] {
        assert!(out.lines().any(|l| l.starts_with(name)), "{name} missing in\n{out}");
    }
}

#[test]
fn shipped_configs_validate() {
    for name in ["bands.toml", "bulk.toml", "ribbon.toml", "chiral.toml", "custom.toml"] {
        let o = run(&["validate", &repo_config(name)]);
        assert_eq!(code(&o), 0, "{name}: {}", stderr(&o));
    }
}

#[test]
fn bands_gap_matches_twice_the_detuning() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("bands");
    let o = run(&["run", "--scenario", "bands", "--delta", "0.3", "--size", "60", "-o", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = manifest(&dir);
    assert_eq!(m["schema_version"], 1);
    let gap = m["metrics"]["min_gap"].as_f64().unwrap();
    let bound = m["metrics"]["gap_resolution_bound"].as_f64().unwrap();
    assert!(gap >= 0.6 - 1e-12 && gap <= bound, "gap {gap}, bound {bound}");

    let mut rdr = csv::Reader::from_path(dir.join("bands.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["kx", "ky", "omega_plus", "omega_minus", "berry_lower"]);
    assert_eq!(rdr.records().count(), 60 * 60);
}

#[test]
fn manifest_replays_to_identical_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let o = run(&["run", "--scenario", "ribbon", "--size", "30", "--delta0", "0.3", "-o", first.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let replay = first.join("manifest.json");
    let o = run(&["run", replay.to_str().unwrap(), "-o", second.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (a, b) = (manifest(&first), manifest(&second));
    assert_eq!(a["config"], b["config"]);
    assert_eq!(a["metrics"], b["metrics"]);
    assert_eq!(a["config"]["ribbon"]["nx"], 30);
    assert_eq!(a["config"]["ribbon"]["delta0"], 0.3);
    let ribbon = std::fs::read_to_string(first.join("ribbon.csv")).unwrap();
    assert!(ribbon.starts_with("ky,band_index,omega,in_gap\n"));
    let profile = std::fs::read_to_string(first.join("profile.csv")).unwrap();
    assert!(profile.starts_with("x,psi_numeric,psi_analytic\n"));
}

#[test]
fn opposite_phases_give_opposite_chirality() {
    let tmp = tempfile::tempdir().unwrap();
    let mut down = Vec::new();
    for (name, phase) in [("plus", "pi/3"), ("minus", "-pi/3")] {
        let dir = tmp.path().join(name);
        let o = run(&[
            "run", "--scenario", "chiral", "--size", "101", "--g", "0.5", "--phase", phase, "-o",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(stderr(&o).contains("weak-coupling"));
        let m = manifest(&dir);
        down.push(m["metrics"]["giant"][0]["chirality_down"].as_f64().unwrap());
        let rates: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("rates.json")).unwrap()).unwrap();
        for key in ["Gamma_normal_per_valley", "Gamma_total", "Gamma_giant_plus", "Gamma_giant_minus", "beta", "xi", "A"] {
            assert!(rates[key].is_number(), "{key}");
        }
        assert!((rates["xi"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    }
    assert!((down[0] - 0.5) * (down[1] - 0.5) < 0.0, "{down:?}");
    assert!(down.iter().all(|d| (d - 0.5).abs() > 0.4), "{down:?}");
}

#[test]
fn validate_warns_on_strong_coupling() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("strong.toml");
    std::fs::write(&path, "scenario = \"chiral\"\n[chiral]\ng = 2.0\n").unwrap();
    let o = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("weak-coupling") && out.contains("g/J = 2.000"), "{out}");
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, "scenario = \"bulk\"\n\n[bulk]\nsize = \"big\"\n").unwrap();
    let o = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("line 4") && err.contains("size"), "{err}");

    let o = run(&["run", "--scenario", "bands", "--g", "0.1"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("does not apply"));

    let o = run(&["run"]);
    assert_eq!(code(&o), 1);

    let o = run(&["validate", "--scenario", "bulk", "--size", "1"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn trigger_miss_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("short");
    let o = run(&["run", "--scenario", "bulk", "--size", "31", "--t-final", "5", "-o", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn failed_checks_exit_with_three() {
    // The lattice half-zone curvature integral is well below 1/2 at this detuning.
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("bands");
    let o = run(&["run", "--scenario", "bands", "--size", "48", "--check", "-o", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    assert!(stdout(&o).contains("[FAIL] valley Chern K"));
}

#[test]
fn empty_sweep_writes_a_header_only_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sweep");
    let o = run(&["sweep", "--scenario", "bands", "--param", "delta", "--values", "", "-o", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.join("sweep_delta.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("delta,status,min_gap"));
}

#[test]
fn sweep_records_rows_and_per_row_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sweep");
    let o = run(&[
        "sweep", "--scenario", "bands", "--size", "30", "--param", "delta", "--values", "0.1,0.3,nan", "-o",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1, "nan is not a valid value");

    let o = run(&[
        "sweep", "--scenario", "bands", "--size", "30", "--param", "delta", "--values", "0.1, 0.3", "-o",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.join("sweep_delta.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for (row, delta) in rows.iter().zip([0.1, 0.3]) {
        assert_eq!(&row[1], "ok");
        let gap: f64 = row[2].parse().unwrap();
        assert!(gap >= 2.0 * delta - 1e-12, "{gap}");
    }
    assert!(dir.join("delta_000/manifest.json").exists());

    let o = run(&[
        "sweep", "--scenario", "ribbon", "--size", "20", "--param", "delta0", "--values", "0.2,0", "-o",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.join("sweep_delta0.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.2,ok") || lines[1].starts_with("0.2,inconsistent"), "{text}");
    assert!(lines[2].starts_with("0,error"), "{text}");
}

#[test]
fn phase_sweep_peaks_at_the_selective_phase() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("phase");
    let o = run(&[
        "sweep", "--scenario", "bulk", "--size", "61", "--g", "0.3", "--param", "phase", "--values",
        "0,pi/6,pi/3,pi/2", "-o", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.join("sweep_phase.csv")).unwrap();
    let col = rdr.headers().unwrap().iter().position(|h| h == "polarization_1").unwrap();
    let pol: Vec<f64> = rdr.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    let best = pol.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert_eq!(best, 2, "{pol:?}");
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--scenario", "bands", "--size", "12"])
        .env("VALLEY_QED_OUTPUT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(tmp.path().join("bands/manifest.json").exists());
}

#[test]
fn wall_decay_rate_scales_with_coupling_squared() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("g");
    let o = run(&[
        "sweep", "--scenario", "chiral", "--size", "251", "--param", "g", "--values", "0.3,0.36", "-o",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.join("sweep_g.csv")).unwrap();
    let col = rdr.headers().unwrap().iter().position(|h| h == "gamma_normal").unwrap();
    let rows: Vec<(f64, f64)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            assert_eq!(&r[1], "ok");
            (r[0].parse().unwrap(), r[col].parse().unwrap())
        })
        .collect();
    let scaled: Vec<f64> = rows.iter().map(|(g, gamma)| gamma / (g * g)).collect();
    assert!((scaled[0] / scaled[1] - 1.0).abs() < 0.10, "{rows:?}");
}
