//! Subcommand bodies shared by the binary and the tests: each one computes,
//! writes its files into an output directory and returns its payload.

use crate::config::{ProfileConfig, RunConfig};
use crate::equilibrium::{check_admissibility, check_profile_admissibility, criterion_scan, AdmissibilityReport, CriterionReport, Equilibrium};
use crate::error::{Error, Result};
use crate::evolve::{growth_bound_check, integrate, random_initial, GrowthBoundReport};
use crate::forms::ModePair;
use crate::growth::{solve_fixed_point, GrowthResult, GrowthStatus};
use crate::profile::PressureProfile;
use crate::report::{float, write_csv, write_json};
use crate::scan::{decay_check, dissipation_scaling_check, scan_modes, DecayReport, FitResult, ModeRange, ScanReport};
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumPayload {
    pub profile: &'static str,
    pub r0: f64,
    pub rw: f64,
    pub admissibility: AdmissibilityReport,
    /// the same profile with its pedestal removed, for the current-bump family
    pub zero_pedestal_admissibility: Option<AdmissibilityReport>,
    pub criteria: Vec<CriterionReport>,
}

/// Radii sampled for the equilibrium table: n points across the plasma and
/// n/2 across the vacuum.
fn table_radii(eq: &Equilibrium, n: usize) -> (Vec<f64>, Vec<f64>) {
    let r0 = eq.r0();
    let plasma = (0..=n).map(|i| r0 * i as f64 / n as f64).collect();
    let nv = (n / 2).max(1);
    let vacuum = (1..=nv).map(|i| r0 + (eq.rw - r0) * i as f64 / nv as f64).collect();
    (plasma, vacuum)
}

pub fn run_equilibrium(cfg: &RunConfig, out: &Path, n: usize) -> Result<EquilibriumPayload> {
    let eq = cfg.equilibrium()?;
    let (plasma, vacuum) = table_radii(&eq, n);
    let mut rows: Vec<Vec<String>> = plasma
        .iter()
        .map(|&r| vec![float(r), float(eq.p(r)), float(eq.dp(r)), float(eq.btheta(r)), float(eq.jz(r)), float(eq.rho(r)), String::new()])
        .collect();
    rows.extend(vacuum.iter().map(|&r| {
        vec![float(r), float(0.0), float(0.0), String::new(), float(0.0), float(0.0), float(eq.bhat(r))]
    }));
    write_csv(&out.join("equilibrium.csv"), cfg, &["r", "p", "dp", "Btheta", "Jz", "rho", "Bhat_theta"], rows)?;

    let inner: Vec<f64> = plasma[1..plasma.len() - 1].to_vec();
    let criteria = (0..=3).map(|m| criterion_scan(&eq, m, &inner)).collect::<Result<Vec<_>>>()?;
    let zero_pedestal_admissibility = match &cfg.profile {
        ProfileConfig::HollowCurrent { a, b, j0, .. } => {
            Some(check_profile_admissibility(&PressureProfile::hollow_current(*a, *b, *j0, 0.0, eq.r0()), 1e-12))
        }
        _ => None,
    };
    let payload = EquilibriumPayload {
        profile: eq.profile.name(),
        r0: eq.r0(),
        rw: eq.rw,
        admissibility: check_admissibility(&eq, 1e-12),
        zero_pedestal_admissibility,
        criteria,
    };
    write_json(&out.join("equilibrium.json"), "equilibrium", cfg, &payload)?;
    Ok(payload)
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    pub fixed_point: f64,
    pub quadratic: f64,
    pub quadratic_scale: f64,
    pub eigen: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthPayload {
    pub m: i64,
    pub k: i64,
    pub status: GrowthStatus,
    pub mu: f64,
    pub s_star: f64,
    pub lambda_at_star: f64,
    pub lambda_samples: Vec<(f64, f64)>,
    pub residuals: Residuals,
    pub dissipation: f64,
    pub iterations: usize,
    pub dense_fallback: bool,
}

impl From<&GrowthResult> for GrowthPayload {
    fn from(r: &GrowthResult) -> Self {
        Self {
            m: r.mode.m,
            k: r.mode.k,
            status: r.status,
            mu: r.mu,
            s_star: r.s_star,
            lambda_at_star: r.lambda_at_star,
            lambda_samples: r.lambda_samples.clone(),
            residuals: Residuals {
                fixed_point: r.fixed_point_residual,
                quadratic: r.quadratic_residual,
                quadratic_scale: r.quadratic_scale,
                eigen: r.eigen_residual,
            },
            dissipation: r.dissipation,
            iterations: r.iterations,
            dense_fallback: r.dense_fallback,
        }
    }
}

pub fn solve_mode(cfg: &RunConfig, eq: &Equilibrium, mode: ModePair) -> Result<GrowthResult> {
    let forms = cfg.assembler(eq)?.assemble(mode)?;
    solve_fixed_point(&forms, &cfg.growth_options())
}

pub fn run_growth(cfg: &RunConfig, out: &Path, mode: ModePair, lambda_csv: bool) -> Result<GrowthPayload> {
    let eq = cfg.equilibrium()?;
    let r = solve_mode(cfg, &eq, mode)?;
    let payload = GrowthPayload::from(&r);
    write_json(&out.join("growth.json"), "growth", cfg, &payload)?;
    if lambda_csv {
        let rows = r.lambda_samples.iter().map(|&(s, l)| vec![float(s), float(l)]);
        write_csv(&out.join("lambda.csv"), cfg, &["s", "lambda"], rows)?;
    }
    Ok(payload)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanPayload {
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub argmax: Option<ModePair>,
    pub argmax_interior: bool,
    pub rectangle_too_small: bool,
    pub symmetry_defect: f64,
    pub ray_monotone: bool,
    pub unresolved: Vec<ModePair>,
    pub fit: Option<FitResult>,
    pub fit_error: Option<String>,
    pub decay: DecayReport,
    pub failures: Vec<String>,
}

/// Scan plus the structural checks. `failures` is non-empty when an
/// unresolved mode borders the argmax.
pub fn run_scan(cfg: &RunConfig, out: &Path, m_range: ModeRange, k_range: ModeRange) -> Result<(ScanReport, ScanPayload)> {
    let eq = cfg.equilibrium()?;
    let asm = cfg.assembler(&eq)?;
    let report = scan_modes(&asm, m_range, k_range, &cfg.scan_options());
    let (fit, fit_error) = match dissipation_scaling_check(&report) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let decay = decay_check(&report, fit.as_ref());
    let rows = report.modes.iter().map(|r| {
        vec![
            r.mode.m.to_string(),
            r.mode.k.to_string(),
            r.status.as_str().to_string(),
            float(r.mu),
            float(r.lambda_at_star),
            float(r.dissipation),
            r.iterations.to_string(),
        ]
    });
    write_csv(&out.join("scan.csv"), cfg, &["m", "k", "status", "mu", "lambda", "D", "iterations"], rows)?;
    let payload = ScanPayload {
        lambda: report.lambda,
        argmax: report.argmax,
        argmax_interior: report.argmax_interior,
        rectangle_too_small: report.rectangle_too_small,
        symmetry_defect: report.symmetry_defect,
        ray_monotone: report.ray_monotone,
        unresolved: report.unresolved.clone(),
        fit,
        fit_error,
        decay,
        failures: report.failures.iter().filter(|f| f.contains("unresolved")).cloned().collect(),
    };
    write_json(&out.join("report.json"), "scan", cfg, &payload)?;
    Ok((report, payload))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialData {
    Eigenmode,
    Random(u64),
}

impl std::str::FromStr for InitialData {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "eigenmode" {
            return Ok(Self::Eigenmode);
        }
        s.strip_prefix("random:")
            .and_then(|seed| seed.parse().ok())
            .map(Self::Random)
            .ok_or_else(|| Error::InvalidParameter(format!("--init must be eigenmode or random:<seed>, got '{s}'")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolvePayload {
    pub m: i64,
    pub k: i64,
    pub mu: f64,
    pub init: String,
    pub t_final: f64,
    pub dt: f64,
    pub dt_threshold: f64,
    pub energy_identity_residual: f64,
    pub growth_bound: GrowthBoundReport,
    /// late-time slope of log ‖g_t‖_M over [5/μ, 8/μ] when the run reaches it
    pub log_slope: Option<f64>,
    /// ‖g(t)‖_M / (‖g(0)‖_M e^{μt}) - 1 at the final time, eigenmode data only
    pub amplitude_error: Option<f64>,
}

pub fn run_evolve(cfg: &RunConfig, out: &Path, mode: ModePair, t_final: f64, dt: f64, init: InitialData) -> Result<EvolvePayload> {
    let eq = cfg.equilibrium()?;
    let forms = cfg.assembler(&eq)?.assemble(mode)?;
    let gr = solve_fixed_point(&forms, &cfg.growth_options())?;
    let mu = gr.mu;
    let (g0, g0_t) = match init {
        InitialData::Eigenmode => {
            let v = gr.minimizer.clone();
            let vt = v.iter().map(|x| mu * x).collect();
            (v, vt)
        }
        InitialData::Random(seed) => (random_initial(&forms, seed), vec![0.0; forms.dim()]),
    };
    let state = integrate(&forms, &g0, &g0_t, t_final, dt)?;
    let rows = state.energy_history.iter().map(|r| {
        vec![float(r.t), float(r.norm_m), float(r.kinetic), float(r.potential), float(r.dissipated)]
    });
    write_csv(&out.join("trajectory.csv"), cfg, &["t", "norm_M", "kinetic", "potential", "dissipated"], rows)?;
    let h = &state.energy_history;
    let amplitude_error = match init {
        InitialData::Eigenmode if h[0].norm_m > 0.0 => {
            let last = h.last().expect("history has the initial record");
            Some(last.norm_m / (h[0].norm_m * (mu * last.t).exp()) - 1.0)
        }
        _ => None,
    };
    let log_slope = if mu > 0.0 && state.t >= 8.0 / mu { state.log_slope(5.0 / mu, 8.0 / mu) } else { None };
    let payload = EvolvePayload {
        m: mode.m,
        k: mode.k,
        mu,
        init: match init {
            InitialData::Eigenmode => "eigenmode".into(),
            InitialData::Random(s) => format!("random:{s}"),
        },
        t_final: state.t,
        dt,
        dt_threshold: state.dt_threshold,
        energy_identity_residual: state.energy_identity_residual(),
        growth_bound: growth_bound_check(&state, mu, &forms),
        log_slope,
        amplitude_error,
    };
    write_json(&out.join("evolve.json"), "evolve", cfg, &payload)?;
    Ok(payload)
}
