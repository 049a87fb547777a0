//! Invariant checks. Each check is a standalone function so that the test
//! suite can run it at its own tolerances; `run_verify` strings the default
//! selection together for the `verify` subcommand.

use crate::banded::BandMatrix;
use crate::config::{ProfileConfig, RunConfig};
use crate::eigen::{smallest_eigenpair, verify_minimizer_euler_lagrange, EigenOptions};
use crate::equilibrium::{check_admissibility, check_profile_admissibility, Equilibrium};
use crate::error::Result;
use crate::evolve::integrate;
use crate::forms::{condense_vacuum, Discretization, FormAssembler, ModeForms, ModePair};
use crate::growth::{lambda_curve, solve_fixed_point, GrowthOptions, GrowthResult, GrowthStatus};
use crate::integrate::{gauss_kronrod, gauss_legendre};
use crate::mesh::{make_grid, quadrature, Region};
use crate::profile::{PressureProfile, ProfileKind};
use crate::report::write_json;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// the measured quantity compared against `tolerance`
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    /// Passes when value ≤ tolerance.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value <= tolerance, value, tolerance, detail: detail.into() }
    }

    /// Passes when value ≥ tolerance.
    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value >= tolerance, value, tolerance, detail: detail.into() }
    }

    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, value: f64::from(u8::from(passed)), tolerance: 1.0, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {:.3e} (tolerance {:.1e}){}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance,
            if self.detail.is_empty() { String::new() } else { format!(" [{}]", self.detail) }
        )
    }
}

/// Plasma quadrature nodes of the configured mesh.
pub fn plasma_nodes(asm: &FormAssembler, mode: ModePair) -> Result<Vec<f64>> {
    Ok(quadrature(&asm.space(mode)?).iter().map(|q| q.r).collect())
}

/// Integrated force balance r²B² = -2∫₀ʳ s²p' ds, re-integrated independently
/// at each node; relative to the largest r²B² on the nodes.
pub fn check_force_balance(eq: &Equilibrium, nodes: &[f64], tol: f64) -> Check {
    let scale = nodes.iter().map(|&r| (r * eq.btheta(r)).powi(2)).fold(f64::MIN_POSITIVE, f64::max);
    let mut worst: f64 = 0.0;
    let mut prev = (0.0, 0.0);
    for &r in nodes {
        let acc = prev.1 - 2.0 * gauss_kronrod(|s| s * s * eq.dp(s), prev.0, r, 1e-15);
        prev = (r, acc);
        worst = worst.max(((r * eq.btheta(r)).powi(2) - acc).abs() / scale);
    }
    Check::at_most("force balance", worst, tol, format!("{} quadrature nodes", nodes.len()))
}

/// Closed forms of the parabolic profile: B_θ = r √p0 / r0 and J_z = 2√p0 / r0.
pub fn check_parabolic_closed_forms(eq: &Equilibrium, nodes: &[f64], b_tol: f64, j_tol: f64) -> Vec<Check> {
    let ProfileKind::Parabolic { p0 } = eq.profile.kind else { return Vec::new() };
    let r0 = eq.r0();
    let c = p0.sqrt() / r0;
    let b = nodes.iter().map(|&r| (eq.btheta(r) - c * r).abs() / (c * r)).fold(0.0, f64::max);
    let j = nodes.iter().chain(&[0.0]).map(|&r| (eq.jz(r) - 2.0 * c).abs() / (2.0 * c)).fold(0.0, f64::max);
    let f = nodes.iter().map(|&r| (eq.dp(r) + eq.btheta(r) * eq.jz(r)).abs() / (2.0 * p0 / r0)).fold(0.0, f64::max);
    vec![
        Check::at_most("parabolic B_theta = r", b, b_tol, "relative"),
        Check::at_most("parabolic J_z = 2", j, j_tol, "relative"),
        Check::at_most("parabolic p' + B_theta J_z = 0", f, j_tol, "relative to max |p'|"),
    ]
}

/// r·B̂_θ constant across the vacuum nodes.
pub fn check_vacuum_field(eq: &Equilibrium, asm: &FormAssembler, tol: f64) -> Check {
    let nodes = &asm.vacuum_grid.nodes;
    let ref_value = eq.r0() * eq.bhat(eq.r0());
    let worst = nodes.iter().map(|&r| (r * eq.bhat(r) - ref_value).abs() / ref_value.abs()).fold(0.0, f64::max);
    Check::at_most("r Bhat_theta constant", worst, tol, "relative spread")
}

/// Gauss–Legendre rules integrate x^j exactly for j < 2n, and the mesh
/// quadrature reproduces ∫₀^{r0} r^j dr at the degree it is built for.
pub fn check_quadrature(asm: &FormAssembler) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for n in 1..=8 {
        let rule = gauss_legendre(n);
        for j in 0..2 * n {
            let exact = if j % 2 == 0 { 2.0 / (j as f64 + 1.0) } else { 0.0 };
            let got: f64 = rule.iter().map(|&(x, w)| w * x.powi(j as i32)).sum();
            worst = worst.max((got - exact).abs());
        }
    }
    let space = asm.space(ModePair::new(0, 1))?;
    let q = quadrature(&space);
    let r0 = asm.eq.r0();
    for j in 0..2 * space.quadrature_points() {
        let exact = r0.powi(j as i32 + 1) / (j as f64 + 1.0);
        let got: f64 = q.iter().map(|p| p.weight * p.r.powi(j as i32)).sum();
        worst = worst.max((got - exact).abs() / exact);
    }
    Ok(Check::at_most("quadrature exactness", worst, 1e-13, "Gauss-Legendre 1..8 points and mesh rule"))
}

/// Symmetry, positive definiteness of M, semidefiniteness of K1 (certified
/// by a Cholesky factorization of K1 + τ‖K1‖I) and affinity of the pencil
/// in s on random vectors.
pub fn check_form_structure(forms: &ModeForms, vectors: usize, seed: u64, sym_tol: f64, psd_tol: f64) -> Vec<Check> {
    let mode = forms.mode;
    let asym = [&forms.k0, &forms.k1, &forms.mass].iter().map(|a| a.asymmetry()).fold(0.0, f64::max);
    let n = forms.dim();
    let shift = psd_tol * forms.k1.norm_inf();
    let k1_shifted = forms.k1.combine(1.0, &BandMatrix::identity(n), shift);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut affinity: f64 = 0.0;
    for _ in 0..vectors {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = rng.gen_range(0.0..4.0);
        let direct = forms.pencil(s).quad(&v);
        let parts = forms.k0.quad(&v) + s * forms.k1.quad(&v);
        let scale = forms.scale(s) * v.iter().map(|x| x * x).sum::<f64>();
        affinity = affinity.max((direct - parts).abs() / scale);
    }
    vec![
        Check::at_most(format!("{mode} symmetry of K0, K1, M"), asym, sym_tol, "relative"),
        Check::flag(format!("{mode} M positive definite"), forms.mass.cholesky().is_ok(), "Cholesky"),
        Check::flag(
            format!("{mode} K1 semidefinite"),
            k1_shifted.cholesky().is_ok(),
            format!("Cholesky of K1 + {psd_tol:.0e} |K1| I"),
        ),
        Check::at_most(format!("{mode} energy affine in s"), affinity, 1e-12, format!("{vectors} random vectors")),
    ]
}

/// The forms of (-m,-k) are the forms of (m,k) conjugated by the reflection
/// signs, entry for entry.
pub fn check_reflection(asm: &FormAssembler, mode: ModePair) -> Result<Check> {
    let a = asm.assemble(mode)?;
    let b = asm.assemble(mode.reflected())?;
    let s = a.reflection_signs();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (x, y) in [(&a.k0, &b.k0), (&a.k1, &b.k1), (&a.mass, &b.mass)] {
        for i in 0..x.dim() {
            for j in i.saturating_sub(x.bandwidth())..(i + x.bandwidth() + 1).min(x.dim()) {
                worst = worst.max((s[i] * s[j] * x.get(i, j) - y.get(i, j)).abs());
                scale = scale.max(x.get(i, j).abs());
            }
        }
    }
    Ok(Check::at_most(format!("{mode} reflection symmetry of forms"), worst / scale, 1e-14, "relative"))
}

/// λ(s) nondecreasing on the grid, and λ(s₂) ≤ λ(s₁) + (s₂ - s₁)·D(v_{s₁}).
pub fn check_lambda_law(forms: &ModeForms, s_values: &[f64], opts: &EigenOptions, tol: f64) -> Result<Vec<Check>> {
    let mode = forms.mode;
    let curve = lambda_curve(forms, s_values, opts)?;
    let mut drop: f64 = 0.0;
    let mut excess: f64 = 0.0;
    for w in curve.windows(2) {
        drop = drop.max(w[0].lambda - w[1].lambda);
        excess = excess.max(w[1].lambda - (w[0].lambda + (w[1].s - w[0].s) * w[0].dissipation));
    }
    Ok(vec![
        Check::at_most(format!("{mode} lambda(s) nondecreasing"), drop, tol, format!("{} s values", s_values.len())),
        Check::at_most(format!("{mode} lambda(s) sandwich"), excess, tol, "upper bound by the previous minimizer"),
    ])
}

/// |Φ(s*) - 1| and the quadratic eigenrelation residual of an unstable mode.
pub fn check_fixed_point(r: &GrowthResult, phi_tol: f64, quad_tol: f64) -> Vec<Check> {
    let mode = r.mode;
    vec![
        Check::at_most(format!("{mode} |Phi(s*) - 1|"), r.fixed_point_residual, phi_tol, format!("mu = {:.9}", r.mu)),
        Check::at_most(
            format!("{mode} quadratic eigenrelation"),
            r.quadratic_residual / r.quadratic_scale,
            quad_tol,
            "relative to |K0| + mu|K1| + mu^2|M|",
        ),
    ]
}

/// For k = 0 the vacuum equation has the solutions r^(m-1) and r^(-m-1); the
/// condensed interior field for a unit trace must match the combination that
/// vanishes at the wall.
pub fn check_vacuum_analytic(eq: &Equilibrium, disc: Discretization, m: i64, tol: f64) -> Result<Check> {
    let (r0, rw) = (eq.r0(), eq.rw);
    let grid = make_grid(Region::Vacuum, r0, rw, disc.n_elements_vacuum, disc.grading_ratio)?;
    let space = crate::forms::vacuum_space(grid, disc.fem_order)?;
    let cond = condense_vacuum(eq, &space, ModePair::new(m, 0))?;
    let (p, q) = ((m - 1) as i32, (-m - 1) as i32);
    // α r^p + β r^q with value 1 at r0 and 0 at rw
    let det = r0.powi(p) * rw.powi(q) - r0.powi(q) * rw.powi(p);
    let alpha = rw.powi(q) / det;
    let beta = -rw.powi(p) / det;
    let exact = |r: f64| alpha * r.powi(p) + beta * r.powi(q);
    let worst = cond
        .interior_radii
        .iter()
        .zip(&cond.interior)
        .map(|(&r, &v)| (v - exact(r)).abs())
        .fold(0.0, f64::max);
    Ok(Check::at_most(
        format!("vacuum m={m} k=0 analytic solution"),
        worst,
        tol,
        format!("{} elements, relative to the unit trace", disc.n_elements_vacuum),
    ))
}

/// Interior Euler–Lagrange residual of the minimizer at s* on successively
/// refined plasma meshes.
pub fn euler_lagrange_study(
    eq: &Equilibrium,
    disc: Discretization,
    asm_visc: crate::forms::Viscosity,
    mode: ModePair,
    elements: &[usize],
    opts: &GrowthOptions,
) -> Result<Vec<(usize, f64, f64)>> {
    elements
        .iter()
        .map(|&n| {
            let d = Discretization { n_elements_plasma: n, ..disc };
            let forms = FormAssembler::new(eq, d, asm_visc)?.assemble(mode)?;
            let gr = solve_fixed_point(&forms, opts)?;
            let r = smallest_eigenpair(&forms, gr.s_star, &opts.eigen)?;
            Ok((n, gr.mu, verify_minimizer_euler_lagrange(&forms, eq, &r, gr.s_star).interior_total()))
        })
        .collect()
}

/// Energy identity of the trapezoidal trajectory started from the growing
/// eigenmode (or a velocity kick along the minimizer for a stable mode).
pub fn check_energy_identity(forms: &ModeForms, gr: &GrowthResult, tol: f64) -> Result<Check> {
    let v = &gr.minimizer;
    let (t_final, dt, g0, g0_t) = if gr.mu > 0.0 {
        (1.0 / gr.mu, 1e-3 / gr.mu, v.clone(), v.iter().map(|x| gr.mu * x).collect())
    } else {
        (1.0, 1e-3, vec![0.0; v.len()], v.clone())
    };
    let state = integrate(forms, &g0, &g0_t, t_final, dt)?;
    Ok(Check::at_most(
        format!("{} energy identity", forms.mode),
        state.energy_identity_residual(),
        tol,
        "per unit time, relative",
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
    pub caveats: Vec<String>,
}

/// Modes used by the structural checks.
const PROBE_MODES: [(i64, i64); 3] = [(0, 1), (1, 1), (2, 1)];

pub fn run_verify(cfg: &RunConfig, out: &Path) -> Result<VerifyReport> {
    let eq = cfg.equilibrium()?;
    let asm = cfg.assembler(&eq)?;
    let opts = cfg.growth_options();
    let mut checks = Vec::new();
    let mut caveats = Vec::new();

    let adm = check_admissibility(&eq, 1e-12);
    checks.push(Check::flag("profile admissible", adm.admissible, adm.reasons.join("; ")));
    if let ProfileConfig::HollowCurrent { a, b, j0, pedestal } = &cfg.profile {
        let bare = check_profile_admissibility(&PressureProfile::hollow_current(*a, *b, *j0, 0.0, eq.r0()), 1e-12);
        caveats.push(format!(
            "current-bump profile regularized by the pedestal {pedestal}; without it the profile is {} ({})",
            if bare.admissible { "admissible" } else { "not admissible" },
            bare.reasons.join("; ")
        ));
    }
    let nodes = plasma_nodes(&asm, ModePair::new(0, 1))?;
    checks.push(check_force_balance(&eq, &nodes, 1e-8));
    checks.extend(check_parabolic_closed_forms(&eq, &nodes, 1e-10, 1e-8));
    checks.push(check_vacuum_field(&eq, &asm, 1e-12));
    checks.push(check_quadrature(&asm)?);

    for (m, k) in PROBE_MODES {
        let mode = ModePair::new(m, k);
        let forms = asm.assemble(mode)?;
        checks.extend(check_form_structure(&forms, 100, cfg.seeds.random, 1e-12, 1e-10));
        checks.push(check_reflection(&asm, mode)?);
        let s_values: Vec<f64> = (0..5).map(|j| 1e-3 * 4f64.powi(j)).collect();
        checks.extend(check_lambda_law(&forms, &s_values, &opts.eigen, 1e-9)?);
    }

    let mut first_unstable = None;
    for (m, k) in [(0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3)] {
        let forms = asm.assemble(ModePair::new(m, k))?;
        let gr = solve_fixed_point(&forms, &opts)?;
        if gr.status == GrowthStatus::Unstable {
            checks.extend(check_fixed_point(&gr, opts.phi_tol, 1e-6));
            first_unstable.get_or_insert((forms, gr));
        }
    }
    if first_unstable.is_none() {
        caveats.push("no unstable mode among |m| <= 1, k = 1..3; fixed-point checks skipped".into());
    }

    checks.push(check_vacuum_analytic(&eq, cfg.discretization, 2, 1e-6)?);

    let study = euler_lagrange_study(&eq, cfg.discretization, cfg.viscosity(), ModePair::new(0, 1), &[32, 64, 128], &opts)?;
    for w in study.windows(2) {
        checks.push(Check::at_least(
            format!("Euler-Lagrange residual ratio N={} to N={}", w[0].0, w[1].0),
            w[0].2 / w[1].2,
            4.0,
            format!("{:.3e} -> {:.3e}", w[0].2, w[1].2),
        ));
    }

    let (forms, gr) = match first_unstable {
        Some(x) => x,
        None => {
            let forms = asm.assemble(ModePair::new(0, 1))?;
            let gr = solve_fixed_point(&forms, &opts)?;
            (forms, gr)
        }
    };
    checks.push(check_energy_identity(&forms, &gr, 1e-8)?);

    let report = VerifyReport { passed: checks.iter().all(|c| c.passed), checks, caveats };
    write_json(&out.join("verify.json"), "verify", cfg, &report)?;
    Ok(report)
}
