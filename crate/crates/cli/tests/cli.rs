use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logchoquard"))
        .current_dir(dir)
        .env_remove("LOGCHOQUARD_CACHE")
        .args(args)
        .output()
        .expect("binary runs")
}

fn manifest(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn checksums(m: &Value) -> Vec<(String, String)> {
    m["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| (a["path"].as_str().unwrap().to_string(), a["sha256"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn reduce_without_potential_is_a_usage_error_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["reduce", "--eps", "0.1", "--out", "t/theta.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let m = manifest(&dir.path().join("t/theta.manifest.json"));
    assert_eq!(m["outcome"]["kind"], "usage");
    assert_eq!(m["outcome"]["exit_code"], 2);
}

#[test]
fn memory_guard_rejects_huge_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["groundstate", "--nx", "100000", "--ny", "100000"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("memory guard"));
    assert!(!dir.path().join("U.csv").exists());
    assert!(dir.path().join("U.manifest.json").exists());
}

#[test]
fn unknown_flags_and_config_keys_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["groundstate", "--bogus"]).status.code(), Some(2));
    let m = manifest(&dir.path().join("groundstate.manifest.json"));
    assert_eq!(m["outcome"]["kind"], "usage");
    assert!(m["results"]["parse_error"].as_str().unwrap().contains("--bogus"));
    assert_eq!(run(dir.path(), &["spectrum", "--manifest", "m/bad.json"]).status.code(), Some(2));
    assert!(dir.path().join("m/bad.json").exists());
    let help = run(dir.path(), &["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(!dir.path().join("logchoquard.manifest.json").exists());
    fs::write(dir.path().join("run.cfg"), "a = 1\nwobble = 2\n").unwrap();
    assert_eq!(run(dir.path(), &["groundstate", "--config", "run.cfg"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["groundstate", "--config", "missing.cfg"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["spectrum", "--state", "nope.lcf2"]).status.code(), Some(3));
}

#[test]
fn groundstate_is_deterministic_and_flags_override_config() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        fs::write(d.path().join("run.cfg"), "a = 1.3\nn = 1000\nnx = 64\nlx = 14\n").unwrap();
        let out = run(d.path(), &["groundstate", "--config", "run.cfg", "--a", "1.0", "--out", "gs/U.csv"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ma = manifest(&a.path().join("gs/U.manifest.json"));
    let mb = manifest(&b.path().join("gs/U.manifest.json"));
    assert_eq!(ma["config"]["a"], "1");
    assert_eq!(ma["config"]["n"], "1000");
    assert_eq!(ma["config"]["rmax"], "20");
    assert_eq!(checksums(&ma).len(), 4);
    assert_eq!(checksums(&ma), checksums(&mb));
    let csv = fs::read_to_string(a.path().join("gs/U.csv")).unwrap();
    let lines: Vec<&str> = csv.split("\r\n").collect();
    assert_eq!(lines[0], "# logchoquard radial v1");
    assert!(lines[1].starts_with("# logchoquard ") && lines[1].contains(" a=1 "));
    assert_eq!(lines[2], "r,u");
    assert_eq!(lines.len(), 1004);
    assert_eq!(lines[1003], "");
}

#[test]
fn spectrum_and_convolve_leave_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(d, &["groundstate", "--nx", "64", "--lx", "14", "--out", "U.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let before = fs::read(d.join("U.lcf2")).unwrap();

    let out = run(d, &["spectrum", "--state", "U.lcf2", "--k", "4", "--out", "sp/spectrum.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(d.join("sp/spectrum.csv")).unwrap();
    let mut lines = table.lines();
    assert!(lines.next().unwrap().starts_with("# logchoquard"));
    assert_eq!(lines.next().unwrap(), "index,eigenvalue,residual,class,field");
    let classes: Vec<&str> = lines.map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(classes, ["negative", "kernel", "kernel", "positive"]);
    for i in 0..4 {
        assert!(d.join(format!("sp/spectrum_{i}.lcf2")).exists());
    }

    let out = run(d, &["convolve", "--in", "U.lcf2", "--out", "phi.lcf2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read(d.join("phi.lcf2")).unwrap().len(), before.len());
    assert!(fs::read_to_string(d.join("phi.lcf2.meta")).unwrap().contains("operation = convolve"));

    assert_eq!(run(d, &["convolve", "--in", "U.lcf2", "--out", "U.lcf2"]).status.code(), Some(2));
    assert_eq!(fs::read(d.join("U.lcf2")).unwrap(), before);
}

#[test]
fn concentrate_writes_one_trajectory_row_per_eps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("dw.pot"), "kind = double-well\nh11 = 2\nh22 = 1\n").unwrap();
    let args = [
        "concentrate",
        "--potential",
        "dw.pot",
        "--eps",
        "0.2,0.1",
        "--xi-grid",
        "3",
        "--xi-max",
        "0.2",
        "--nx",
        "128",
        "--lx",
        "12",
        "--out",
        "runs",
    ];
    let out = run(d, &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let traj = fs::read_to_string(d.join("runs/trajectory.csv")).unwrap();
    let rows: Vec<&str> = traj.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    let xi: Vec<f64> = rows.iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(xi[1].abs() < xi[0].abs());
    for e in ["0.2", "0.1"] {
        for f in ["theta.csv", "u_eps.lcf2", "v_eps.lcf2", "E_eps.lcf2"] {
            assert!(d.join(format!("runs/eps_{e}/{f}")).exists(), "{e} {f}");
        }
    }
    let m = manifest(&d.join("runs/manifest.json"));
    assert!(m["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true), "{m}");
    assert_eq!(fs::read_to_string(d.join("dw.pot")).unwrap(), "kind = double-well\nh11 = 2\nh22 = 1\n");
}

#[test]
fn validate_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["validate", "--out", "val.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("PASS").count(), 10);
    assert!(dir.path().join("val.manifest.json").exists());
}
