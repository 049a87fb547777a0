use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn zpinch(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zpinch"))
        .arg("-c")
        .arg(config)
        .arg("-o")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn small_scan_is_reproducible_and_tagged() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let o = zpinch(&config("parabolic.cfg"), d.path(), &["scan", "--m-range", "-1:1", "--k-range", "-2:2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["scan.csv", "report.json"] {
        assert_eq!(std::fs::read(dirs[0].path().join(name)).unwrap(), std::fs::read(dirs[1].path().join(name)).unwrap(), "{name}");
    }
    let report = json(&dirs[0].path().join("report.json"));
    let hash = report["config_hash"].as_str().unwrap();
    let csv = std::fs::read_to_string(dirs[0].path().join("scan.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), format!("# config_hash={hash}"));
    assert_eq!(csv.lines().count(), 2 + 15);
    assert!(report["payload"]["Lambda"].as_f64().unwrap() > 0.0);
}

#[test]
fn growth_and_evolve_write_their_files() {
    let d = tempfile::tempdir().unwrap();
    let o = zpinch(&config("parabolic.cfg"), d.path(), &["growth", "--m", "0", "--k", "-1", "--lambda-csv"]);
    assert!(o.status.success());
    let g = json(&d.path().join("growth.json"));
    assert_eq!(g["payload"]["status"], "unstable");
    assert!(d.path().join("lambda.csv").exists());

    let o = zpinch(&config("parabolic.cfg"), d.path(), &["evolve", "--m", "1", "--k", "1", "--t-final", "2", "--dt", "0.02", "--init", "random:5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let e = json(&d.path().join("evolve.json"));
    assert_eq!(e["payload"]["growth_bound"]["passed"], true);
    let traj = std::fs::read_to_string(d.path().join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().nth(1).unwrap(), "t,norm_M,kinetic,potential,dissipated");
}

#[test]
fn equilibrium_and_verify_succeed_on_both_configs() {
    for name in ["parabolic.cfg", "hollow.cfg"] {
        let d = tempfile::tempdir().unwrap();
        let o = zpinch(&config(name), d.path(), &["equilibrium", "--points", "50"]);
        assert!(o.status.success(), "{name}");
        let csv = std::fs::read_to_string(d.path().join("equilibrium.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2 + 51 + 25);
        let o = zpinch(&config(name), d.path(), &["verify"]);
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert!(o.status.success(), "{name}:\n{stdout}");
        assert!(!stdout.contains("FAIL"));
        assert_eq!(json(&d.path().join("verify.json"))["payload"]["passed"], true);
    }
}

#[test]
fn invalid_input_exits_with_one() {
    let d = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("parabolic.cfg")).unwrap();
    let bad = d.path().join("bad.cfg");
    std::fs::write(&bad, text.replace("gamma = 1.6666666666666667", "gamma = 0.9").replace("epsilon = 0.1", "epsilon = 0.0")).unwrap();
    let o = zpinch(&bad, d.path(), &["verify"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("gamma") && err.contains("viscosity"), "{err}");

    let o = zpinch(&d.path().join("missing.cfg"), d.path(), &["verify"]);
    assert_eq!(o.status.code(), Some(1));

    let o = zpinch(&config("parabolic.cfg"), d.path(), &["scan", "--m-range", "2:1"]);
    assert_eq!(o.status.code(), Some(1));
}
