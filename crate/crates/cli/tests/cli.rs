use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sqcoupler"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("sqcoupler-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str], config: Option<&str>, dir: &Path) -> Output {
    let mut cmd = bin();
    cmd.args(args).arg("--out").arg(dir.join("out"));
    if let Some(text) = config {
        let path = dir.join("cfg.toml");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

const SMALL_SWEEP: &str = "schema_version = 1\n[experiment]\nflux_points = 4\neig_count = 3\n";

#[test]
fn sweep_writes_csv_and_manifest() {
    let d = scratch("sweep");
    let o = run(&["zz-sweep"], Some(SMALL_SWEEP), &d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.join("out/zz_sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "flux,zeta_GHz,hybridization,omega1_GHz,omega2_GHz,eig_0,eig_1,eig_2");
    assert_eq!(lines.len(), 5);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert!(first.iter().all(|c| c.contains('e')), "{first:?}");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("out/zz-sweep.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "zz-sweep");
    assert_eq!(manifest["config"]["schema_version"], 1);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
    let off = manifest["summary"]["phi_off"].as_f64().unwrap();
    assert!((off - 0.5156).abs() < 1e-3);
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let d = scratch("rerun");
    let a = run(&["zz-sweep", "--threads", "1"], Some(SMALL_SWEEP), &d);
    assert!(a.status.success());
    let first = fs::read(d.join("out/zz_sweep.csv")).unwrap();
    let b = run(&["zz-sweep", "--threads", "3"], Some(SMALL_SWEEP), &d);
    assert!(b.status.success());
    assert_eq!(first, fs::read(d.join("out/zz_sweep.csv")).unwrap());
}

#[test]
fn config_errors_exit_with_one_and_name_the_line() {
    let d = scratch("badcfg");
    let o = run(&["find-off"], Some("schema_version = 1\n[numerics]\nncut = -3\n"), &d);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let o = run(&["find-off"], Some("schema_version = 1\n[circuit]\nwidth = 3\n"), &d);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["find-off", "--dt", "-1"], None, &d);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["no-such-experiment"], None, &d);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_idle_point_is_a_physics_error() {
    let d = scratch("noidle");
    let o = run(&["find-off"], Some("schema_version = 1\n[circuit]\ncc1 = 8.0\ncc2 = 8.0\n"), &d);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no idle point"));
}

#[test]
fn ncut_override_reaches_the_manifest() {
    let d = scratch("ncut");
    let o = run(&["find-off", "--ncut", "8"], None, &d);
    assert!(o.status.success());
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("out/find-off.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["numerics"]["ncut"], 8);
}

#[test]
fn spectrum_lists_labeled_states() {
    let d = scratch("spectrum");
    let o = run(&["spectrum"], None, &d);
    assert!(o.status.success());
    let csv = fs::read_to_string(d.join("out/spectrum.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0"), "{row}");
}

#[test]
fn sample_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.toml");
    let d = scratch("sample");
    let o = bin().args(["find-off", "--config"]).arg(path).arg("--out").arg(d.join("out")).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
