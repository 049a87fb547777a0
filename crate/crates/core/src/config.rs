//! Run configuration: a TOML file with fixed sections. Unknown keys and every
//! range violation are collected and reported together.

use crate::eigen::EigenOptions;
use crate::equilibrium::{build_equilibrium, Equilibrium};
use crate::error::{Error, Result};
use crate::forms::{Discretization, FormAssembler, Viscosity};
use crate::growth::GrowthOptions;
use crate::profile::PressureProfile;
use crate::scan::{ModeRange, ScanOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileConfig {
    Parabolic { p0: f64 },
    PowerLaw { p0: f64, exponent: f64 },
    HollowCurrent { a: f64, b: f64, j0: f64, pedestal: f64 },
    Table { r: Vec<f64>, p: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub r0: f64,
    pub rw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Physics {
    pub gamma: f64,
    #[serde(rename = "A")]
    pub entropy_a: f64,
    pub epsilon: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub eig_tol: f64,
    pub eig_max_iter: usize,
    pub dense_threshold: usize,
    pub s_floor: f64,
    pub s_max: f64,
    pub lambda_zero_tol: f64,
    pub phi_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let g = GrowthOptions::default();
        Self {
            eig_tol: g.eigen.tol,
            eig_max_iter: g.eigen.max_iter,
            dense_threshold: g.eigen.dense_threshold,
            s_floor: g.s_floor,
            s_max: g.s_max,
            lambda_zero_tol: g.lambda_zero_tol,
            phi_tol: g.phi_tol,
        }
    }
}

/// `"a:b"` or `[a, b]` in the file; always written back as `"a:b"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum RangeSpec {
    Text(String),
    Pair([i64; 2]),
}

fn range_from_text<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<(i64, i64), D::Error> {
    match RangeSpec::deserialize(d)? {
        RangeSpec::Pair([a, b]) => Ok((a, b)),
        RangeSpec::Text(s) => {
            let (a, b) = s.split_once(':').ok_or_else(|| serde::de::Error::custom(format!("range '{s}' is not a:b")))?;
            let p = |x: &str| x.trim().parse::<i64>().map_err(|_| serde::de::Error::custom(format!("range '{s}' is not a:b")));
            Ok((p(a)?, p(b)?))
        }
    }
}

fn range_to_text<S: serde::Serializer>(r: &(i64, i64), s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}:{}", r.0, r.1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    #[serde(deserialize_with = "range_from_text", serialize_with = "range_to_text")]
    pub m_range: (i64, i64),
    #[serde(deserialize_with = "range_from_text", serialize_with = "range_to_text")]
    pub k_range: (i64, i64),
    pub exploit_symmetry: bool,
    pub parallel: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { m_range: (-3, 3), k_range: (-8, 8), exploit_symmetry: false, parallel: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub random: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { random: 7 }
    }
}

fn default_discretization() -> Discretization {
    Discretization { n_elements_plasma: 128, n_elements_vacuum: 64, fem_order: 2, grading_ratio: 20.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub profile: ProfileConfig,
    pub geometry: Geometry,
    pub physics: Physics,
    #[serde(default = "default_discretization")]
    pub discretization: Discretization,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub seeds: Seeds,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("profile", &["kind", "p0", "exponent", "a", "b", "j0", "pedestal", "r", "p"]),
    ("geometry", &["r0", "rw"]),
    ("physics", &["gamma", "A", "epsilon", "delta"]),
    ("discretization", &["n_elements_plasma", "n_elements_vacuum", "fem_order", "grading_ratio"]),
    ("solver", &["eig_tol", "eig_max_iter", "dense_threshold", "s_floor", "s_max", "lambda_zero_tol", "phi_tol"]),
    ("scan", &["m_range", "k_range", "exploit_symmetry", "parallel"]),
    ("seeds", &["random"]),
];

fn profile_keys(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "parabolic" => &["kind", "p0"],
        "power_law" => &["kind", "p0", "exponent"],
        "hollow_current" => &["kind", "a", "b", "j0", "pedestal"],
        "table" => &["kind", "r", "p"],
        _ => return None,
    })
}

fn unknown_keys(table: &toml::Table) -> Vec<String> {
    let mut out = Vec::new();
    for (name, value) in table {
        let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| s == name) else {
            out.push(if value.is_table() { format!("unknown section [{name}]") } else { format!("unknown top-level key {name}") });
            continue;
        };
        let Some(sub) = value.as_table() else {
            out.push(format!("[{name}] must be a table"));
            continue;
        };
        let allowed: &[&str] = if name == "profile" {
            match sub.get("kind").and_then(|k| k.as_str()) {
                Some(kind) => match profile_keys(kind) {
                    Some(k) => k,
                    None => {
                        out.push(format!(
                            "profile.kind = '{kind}' is not one of parabolic, power_law, hollow_current, table"
                        ));
                        keys
                    }
                },
                None => {
                    out.push("profile.kind is missing".into());
                    keys
                }
            }
        } else {
            keys
        };
        for key in sub.keys() {
            if !allowed.contains(&key.as_str()) {
                out.push(format!("unknown key {name}.{key}"));
            }
        }
    }
    out
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
        let unknown = unknown_keys(&table);
        if !unknown.is_empty() {
            return Err(Error::ConfigValidation(unknown));
        }
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        let violations = cfg.violations();
        if violations.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::ConfigValidation(violations))
        }
    }

    /// Every range or positivity violation, in section order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        fn check(v: &mut Vec<String>, ok: bool, msg: String) {
            if !ok {
                v.push(msg);
            }
        }
        let g = &self.geometry;
        check(&mut v, g.r0 > 0.0 && g.r0.is_finite(), format!("geometry.r0 must be positive, got {}", g.r0));
        check(&mut v, g.rw > g.r0, format!("geometry.rw must exceed r0 (rw = {}, r0 = {})", g.rw, g.r0));
        let ph = &self.physics;
        check(&mut v, ph.gamma > 1.0, format!("gamma must exceed 1, got {}", ph.gamma));
        check(&mut v, ph.entropy_a > 0.0, format!("physics.A must be positive, got {}", ph.entropy_a));
        if let Err(e) = (Viscosity { epsilon: ph.epsilon, delta: ph.delta }).validate() {
            v.push(e.to_string());
        }
        let d = &self.discretization;
        check(&mut v, d.n_elements_plasma >= 4, format!("n_elements_plasma must be at least 4, got {}", d.n_elements_plasma));
        check(&mut v, d.n_elements_vacuum >= 4, format!("n_elements_vacuum must be at least 4, got {}", d.n_elements_vacuum));
        check(&mut v, d.fem_order == 1 || d.fem_order == 2, format!("fem_order must be 1 or 2, got {}", d.fem_order));
        check(&mut v, 
            (1.0..=20.0).contains(&d.grading_ratio),
            format!("grading_ratio must lie in [1, 20], got {}", d.grading_ratio),
        );
        let s = &self.solver;
        check(&mut v, s.eig_tol > 0.0, format!("eig_tol must be positive, got {}", s.eig_tol));
        check(&mut v, s.eig_max_iter >= 1, "eig_max_iter must be at least 1".into());
        check(&mut v, s.s_floor > 0.0, format!("s_floor must be positive, got {}", s.s_floor));
        check(&mut v, s.s_max > s.s_floor, format!("s_max must exceed s_floor, got {}", s.s_max));
        check(&mut v, s.lambda_zero_tol >= 0.0, format!("lambda_zero_tol must be nonnegative, got {}", s.lambda_zero_tol));
        check(&mut v, s.phi_tol > 0.0, format!("phi_tol must be positive, got {}", s.phi_tol));
        let sc = &self.scan;
        check(&mut v, sc.m_range.0 <= sc.m_range.1, format!("scan.m_range {}:{} is empty", sc.m_range.0, sc.m_range.1));
        check(&mut v, sc.k_range.0 <= sc.k_range.1, format!("scan.k_range {}:{} is empty", sc.k_range.0, sc.k_range.1));
        if let ProfileConfig::Table { r, .. } = &self.profile {
            if let Some(&last) = r.last() {
                check(&mut v, last == g.r0, format!("pressure table must end at r0 = {}, ends at {last}", g.r0));
            }
        }
        match self.pressure_profile() {
            Ok(p) => {
                if let Err(e) = p.validate() {
                    v.push(e.to_string());
                }
            }
            Err(e) => v.push(e.to_string()),
        }
        v
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn pressure_profile(&self) -> Result<PressureProfile> {
        let r0 = self.geometry.r0;
        Ok(match &self.profile {
            ProfileConfig::Parabolic { p0 } => PressureProfile::parabolic(*p0, r0),
            ProfileConfig::PowerLaw { p0, exponent } => PressureProfile::power_law(*p0, *exponent, r0),
            ProfileConfig::HollowCurrent { a, b, j0, pedestal } => PressureProfile::hollow_current(*a, *b, *j0, *pedestal, r0),
            ProfileConfig::Table { r, p } => PressureProfile::table(r.clone(), p.clone())?,
        })
    }

    pub fn equilibrium(&self) -> Result<Equilibrium> {
        build_equilibrium(self.pressure_profile()?, self.geometry.rw, self.physics.gamma, self.physics.entropy_a)
    }

    pub fn viscosity(&self) -> Viscosity {
        Viscosity { epsilon: self.physics.epsilon, delta: self.physics.delta }
    }

    pub fn assembler(&self, eq: &Equilibrium) -> Result<FormAssembler> {
        FormAssembler::new(eq, self.discretization, self.viscosity())
    }

    pub fn growth_options(&self) -> GrowthOptions {
        let s = &self.solver;
        GrowthOptions {
            s_floor: s.s_floor,
            s_max: s.s_max,
            lambda_zero_tol: s.lambda_zero_tol,
            phi_tol: s.phi_tol,
            eigen: EigenOptions { tol: s.eig_tol, max_iter: s.eig_max_iter, dense_threshold: s.dense_threshold },
        }
    }

    pub fn scan_options(&self) -> ScanOptions {
        ScanOptions { growth: self.growth_options(), parallel: self.scan.parallel, exploit_symmetry: self.scan.exploit_symmetry }
    }

    pub fn m_range(&self) -> ModeRange {
        ModeRange { lo: self.scan.m_range.0, hi: self.scan.m_range.1 }
    }

    pub fn k_range(&self) -> ModeRange {
        ModeRange { lo: self.scan.k_range.0, hi: self.scan.k_range.1 }
    }

    /// Canonical JSON form; the hash below is taken over these bytes.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[profile]
kind = "parabolic"
p0 = 1.0

[geometry]
r0 = 1.0
rw = 2.0

[physics]
gamma = 1.6666666666666667
A = 1.0
epsilon = 0.1
delta = 0.1
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::from_toml_str(BASE).unwrap();
        assert_eq!(c.discretization.n_elements_plasma, 128);
        assert_eq!(c.scan.k_range, (-8, 8));
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn every_violation_is_listed() {
        let text = BASE.replace("gamma = 1.6666666666666667", "gamma = 0.9").replace("rw = 2.0", "rw = 0.5");
        let Err(Error::ConfigValidation(v)) = RunConfig::from_toml_str(&text) else { panic!() };
        assert!(v.iter().any(|m| m.contains("gamma must exceed 1")));
        assert!(v.iter().any(|m| m.contains("rw must exceed r0")));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{BASE}\nbogus = 1\n[extra]\nx = 1\n");
        let Err(Error::ConfigValidation(v)) = RunConfig::from_toml_str(&text) else { panic!() };
        assert_eq!(v.len(), 2, "{v:?}");
    }

    #[test]
    fn parse_errors_carry_position() {
        let Err(Error::ConfigParse(msg)) = RunConfig::from_toml_str("[geometry\nr0 = 1") else { panic!() };
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn ranges_accept_both_spellings() {
        let text = format!("{BASE}\n[scan]\nm_range = [-2, 2]\nk_range = \"-4:4\"\n");
        let c = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!((c.scan.m_range, c.scan.k_range), ((-2, 2), (-4, 4)));
        assert!(c.canonical_json().contains("\"-2:2\""));
    }
}
