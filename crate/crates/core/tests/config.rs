use std::path::PathBuf;

use zpinch::config::{ProfileConfig, RunConfig};
use zpinch::equilibrium::check_admissibility;
use zpinch::Error;

fn shipped(name: &str) -> RunConfig {
    RunConfig::from_path(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)).unwrap()
}

#[test]
fn shipped_configs_build_admissible_equilibria() {
    for name in ["parabolic.cfg", "hollow.cfg"] {
        let cfg = shipped(name);
        let eq = cfg.equilibrium().unwrap();
        assert!(check_admissibility(&eq, 1e-12).admissible, "{name}");
    }
    assert!(matches!(shipped("hollow.cfg").profile, ProfileConfig::HollowCurrent { .. }));
}

#[test]
fn hash_ignores_layout_but_not_values() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/parabolic.cfg");
    let text = std::fs::read_to_string(path).unwrap();
    let base = RunConfig::from_toml_str(&text).unwrap();
    let reformatted: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}  \n")).collect();
    assert_eq!(RunConfig::from_toml_str(&reformatted).unwrap().hash(), base.hash());
    let changed = RunConfig::from_toml_str(&text.replace("epsilon = 0.1", "epsilon = 0.2")).unwrap();
    assert_ne!(changed.hash(), base.hash());
}

#[test]
fn table_profile_round_trips() {
    let r: Vec<String> = (0..=10).map(|i| format!("{}", i as f64 / 10.0)).collect();
    let p: Vec<String> = (0..=10).map(|i| format!("{}", 1.0 - (i as f64 / 10.0).powi(2))).collect();
    let text = format!(
        "[profile]\nkind = \"table\"\nr = [{}]\np = [{}]\n[geometry]\nr0 = 1.0\nrw = 2.0\n\
         [physics]\ngamma = 1.6666666666666667\nA = 1.0\nepsilon = 0.1\ndelta = 0.1\n",
        r.join(", "),
        p.join(", ")
    );
    let cfg = RunConfig::from_toml_str(&text).unwrap();
    let eq = cfg.equilibrium().unwrap();
    // the spline reproduces the parabola, so B_θ is close to r
    assert!((eq.btheta(0.5) - 0.5).abs() < 1e-3);
    let again: RunConfig = serde_json::from_str(&cfg.canonical_json()).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn bad_values_are_all_reported() {
    let text = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/parabolic.cfg")).unwrap();
    let text = text
        .replace("gamma = 1.6666666666666667", "gamma = 0.9")
        .replace("epsilon = 0.1", "epsilon = 0.0")
        .replace("grading_ratio = 20.0", "grading_ratio = 40.0")
        .replace("m_range = \"-3:3\"", "m_range = \"3:-3\"");
    let Err(Error::ConfigValidation(v)) = RunConfig::from_toml_str(&text) else { panic!("accepted") };
    assert_eq!(v.len(), 4, "{v:?}");
    assert_eq!(Error::ConfigValidation(v).exit_code(), 1);
}
