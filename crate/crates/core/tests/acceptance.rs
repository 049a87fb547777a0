//! Acceptance suite on the parabolic pinch. Runs as a plain binary so that
//! every criterion prints its PASS/FAIL line whether or not it holds; the
//! process exits non-zero when any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use zpinch::config::RunConfig;
use zpinch::equilibrium::Equilibrium;
use zpinch::evolve::{growth_bound_check, integrate, random_initial};
use zpinch::forms::{Discretization, FormAssembler, ModePair};
use zpinch::growth::{solve_fixed_point, GrowthStatus};
use zpinch::run::run_scan;
use zpinch::scan::{decay_check, dissipation_scaling_check, scan_modes, ScanOptions, ScanReport};
use zpinch::verify::{
    check_force_balance, check_form_structure, check_lambda_law, check_parabolic_closed_forms, check_vacuum_analytic,
    check_vacuum_field, euler_lagrange_study, plasma_nodes, Check,
};
use zpinch::Result;

struct Fixture {
    cfg: RunConfig,
    eq: Equilibrium,
    asm: FormAssembler,
    scan: ScanReport,
}

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn from_checks(checks: &[Check]) -> Self {
        let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(Check::line).collect();
        if failed.is_empty() {
            Self { passed: true, detail: format!("{} checks passed", checks.len()) }
        } else {
            Self { passed: false, detail: failed.join("\n    ") }
        }
    }
}

fn config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/parabolic.cfg")
}

fn fixture() -> Result<Fixture> {
    let cfg = RunConfig::from_path(&config_path())?;
    let eq = cfg.equilibrium()?;
    let asm = cfg.assembler(&eq)?;
    let opts = ScanOptions { parallel: true, exploit_symmetry: false, ..cfg.scan_options() };
    let scan = scan_modes(&asm, cfg.m_range(), cfg.k_range(), &opts);
    Ok(Fixture { cfg, eq, asm, scan })
}

fn equilibrium_exactness(fx: &Fixture) -> Result<Outcome> {
    let nodes = plasma_nodes(&fx.asm, ModePair::new(0, 1))?;
    let mut checks = vec![check_force_balance(&fx.eq, &nodes, 1e-8)];
    checks.extend(check_parabolic_closed_forms(&fx.eq, &nodes, 1e-10, 1e-8));
    Ok(Outcome::from_checks(&checks))
}

fn vacuum_correctness(fx: &Fixture) -> Result<Outcome> {
    let disc = Discretization { n_elements_vacuum: 64, ..fx.cfg.discretization };
    let checks = vec![check_vacuum_field(&fx.eq, &fx.asm, 1e-12), check_vacuum_analytic(&fx.eq, disc, 2, 1e-6)?];
    Ok(Outcome::from_checks(&checks))
}

fn form_structure(fx: &Fixture) -> Result<Outcome> {
    let mut checks = Vec::new();
    for r in &fx.scan.modes {
        let forms = fx.asm.assemble(r.mode)?;
        checks.extend(check_form_structure(&forms, 100, fx.cfg.seeds.random, 1e-12, 1e-10));
    }
    Ok(Outcome::from_checks(&checks))
}

fn lambda_law(fx: &Fixture) -> Result<Outcome> {
    let s: Vec<f64> = (0..10).map(|j| 1e-3 * 2f64.powi(j)).collect();
    let opts = fx.cfg.growth_options().eigen;
    let mut checks = Vec::new();
    for (m, k) in [(0, 1), (1, 1), (2, 1)] {
        checks.extend(check_lambda_law(&fx.asm.assemble(ModePair::new(m, k))?, &s, &opts, 1e-9)?);
    }
    Ok(Outcome::from_checks(&checks))
}

fn classification(fx: &Fixture) -> Result<Outcome> {
    let phi_tol = 1e-6;
    let mut bad = Vec::new();
    let mut count = 0;
    for r in &fx.scan.modes {
        count += 1;
        let mode = r.mode;
        if mode.m.abs() <= 1 {
            if r.status != GrowthStatus::Unstable || !(r.mu > 0.0) || !(r.fixed_point_residual <= phi_tol) {
                bad.push(format!("{mode}: expected unstable, got {} (mu = {:.3e})", r.status.as_str(), r.mu));
            }
        } else {
            let lambda_floor = r.lambda_samples.first().map_or(f64::NAN, |x| x.1);
            if r.status != GrowthStatus::Stable || !(lambda_floor >= -1e-10) {
                bad.push(format!("{mode}: expected stable, got {} (lambda(s_floor) = {lambda_floor:.3e})", r.status.as_str()));
            }
        }
        if r.status == GrowthStatus::Unstable && !(r.quadratic_residual <= 1e-6 * r.quadratic_scale) {
            bad.push(format!("{mode}: quadratic residual {:.3e} of scale {:.3e}", r.quadratic_residual, r.quadratic_scale));
        }
    }
    Ok(if bad.is_empty() {
        Outcome { passed: true, detail: format!("{count} modes classified as expected") }
    } else {
        Outcome { passed: false, detail: format!("{} of {count} modes off:\n    {}", bad.len(), bad.join("\n    ")) }
    })
}

fn largest_growing_mode(fx: &Fixture) -> Result<Outcome> {
    let opts = ScanOptions { parallel: false, exploit_symmetry: false, ..fx.cfg.scan_options() };
    let serial = scan_modes(&fx.asm, fx.cfg.m_range(), fx.cfg.k_range(), &opts);
    let fit = dissipation_scaling_check(&fx.scan).ok();
    let decay = decay_check(&fx.scan, fit.as_ref());
    let diff = (serial.lambda - fx.scan.lambda).abs();
    let argmax = fx.scan.argmax.map_or("none".to_string(), |a| a.to_string());
    let passed = fx.scan.lambda > 0.0 && fx.scan.argmax_interior && decay.passed && diff <= 1e-8;
    Ok(Outcome {
        passed,
        detail: format!(
            "Lambda = {:.10} at {argmax} (interior: {}); {}; |Lambda_serial - Lambda_parallel| = {diff:.1e}",
            fx.scan.lambda, fx.scan.argmax_interior, decay.diagnostic
        ),
    })
}

fn dissipation_scaling(fx: &Fixture) -> Result<Outcome> {
    let fit = dissipation_scaling_check(&fx.scan)?;
    let g = fit.general;
    Ok(Outcome {
        passed: g.c > 0.0,
        detail: format!("D >= c (m^2 + k^2) - C with c = {:.4}, C = {:.3e} over {} modes with |m| != 1", g.c, g.offset, g.points),
    })
}

fn mesh_convergence(fx: &Fixture) -> Result<Outcome> {
    let mode = ModePair::new(0, 1);
    let opts = fx.cfg.growth_options();
    let visc = fx.cfg.viscosity();
    let mu_at = |n: usize| -> Result<f64> {
        let disc = Discretization { n_elements_plasma: n, ..fx.cfg.discretization };
        Ok(solve_fixed_point(&FormAssembler::new(&fx.eq, disc, visc)?.assemble(mode)?, &opts)?.mu)
    };
    let (mu128, mu256) = (mu_at(128)?, mu_at(256)?);
    let change = (mu256 - mu128).abs() / mu256.abs();
    let study = euler_lagrange_study(&fx.eq, fx.cfg.discretization, visc, mode, &[32, 64, 128], &opts)?;
    let ratios: Vec<f64> = study.windows(2).map(|w| w[0].2 / w[1].2).collect();
    Ok(Outcome {
        passed: change <= 1e-4 && ratios.iter().all(|&q| q >= 4.0),
        detail: format!("mu(0,1) relative change 128 -> 256: {change:.2e}; residual ratios {ratios:.3?}"),
    })
}

fn evolution(fx: &Fixture) -> Result<Outcome> {
    let mut notes = Vec::new();
    let mut passed = true;

    // eigenmode amplitude and energy identity
    for (m, k) in [(0, 1), (1, 1), (0, -3)] {
        let forms = fx.asm.assemble(ModePair::new(m, k))?;
        let gr = solve_fixed_point(&forms, &fx.cfg.growth_options())?;
        let mu = gr.mu;
        let vt: Vec<f64> = gr.minimizer.iter().map(|x| mu * x).collect();
        let st = integrate(&forms, &gr.minimizer, &vt, 1.0 / mu, 1e-3 / mu)?;
        let h = &st.energy_history;
        let last = h.last().expect("history");
        let amp = (last.norm_m / (h[0].norm_m * (mu * last.t).exp()) - 1.0).abs();
        let ident = st.energy_identity_residual();
        let ok = amp <= 1e-2 && ident <= 1e-8;
        passed &= ok;
        notes.push(format!("({m},{k}) amplitude error {amp:.2e}, energy identity {ident:.2e}"));

        let g0 = random_initial(&forms, fx.cfg.seeds.random);
        let st = integrate(&forms, &g0, &vec![0.0; g0.len()], 8.0 / mu, 1e-3 / mu)?;
        let slope = st.log_slope(5.0 / mu, 8.0 / mu).unwrap_or(f64::NAN);
        let rel = (slope / mu - 1.0).abs();
        passed &= rel <= 2e-2;
        notes.push(format!("({m},{k}) random-data slope {slope:.6} vs mu {mu:.6}: {rel:.2e}"));
    }

    // the growth bound on every scanned mode, random initial data
    let mut violations = Vec::new();
    for r in &fx.scan.modes {
        let forms = fx.asm.assemble(r.mode)?;
        let rate = if r.status == GrowthStatus::Unstable { r.mu } else { 0.0 };
        let (t_final, dt) = if rate > 0.0 { (3.0 / rate, 1e-2 / rate) } else { (10.0, 1e-2) };
        let g0 = random_initial(&forms, fx.cfg.seeds.random);
        let st = integrate(&forms, &g0, &vec![0.0; g0.len()], t_final, dt)?;
        let b = growth_bound_check(&st, rate, &forms);
        if !b.passed {
            violations.push(format!("{} worst ratio {:.3e}", r.mode, b.worst_ratio));
        }
    }
    passed &= violations.is_empty();
    notes.push(if violations.is_empty() {
        format!("growth bound holds on all {} scanned modes", fx.scan.modes.len())
    } else {
        format!("growth bound violated: {}", violations.join(", "))
    });
    Ok(Outcome { passed, detail: notes.join("\n    ") })
}

fn determinism(fx: &Fixture) -> Result<Outcome> {
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    for d in &dirs {
        run_scan(&fx.cfg, d.path(), fx.cfg.m_range(), fx.cfg.k_range())?;
    }
    let mut differing = Vec::new();
    for name in ["scan.csv", "report.json"] {
        if std::fs::read(dirs[0].path().join(name))? != std::fs::read(dirs[1].path().join(name))? {
            differing.push(name);
        }
    }
    Ok(Outcome {
        passed: differing.is_empty(),
        detail: if differing.is_empty() { "scan.csv and report.json identical".into() } else { format!("differ: {differing:?}") },
    })
}

type Criterion = fn(&Fixture) -> Result<Outcome>;

fn main() {
    let start = Instant::now();
    let fx = fixture().expect("parabolic fixture builds");
    let criteria: [(&str, Criterion); 10] = [
        ("equilibrium exactness", equilibrium_exactness),
        ("vacuum correctness", vacuum_correctness),
        ("form structure", form_structure),
        ("lambda(s) law", lambda_law),
        ("instability classification", classification),
        ("largest growing mode", largest_growing_mode),
        ("dissipation scaling", dissipation_scaling),
        ("mesh convergence", mesh_convergence),
        ("evolution", evolution),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = run(&fx).unwrap_or_else(|e| Outcome { passed: false, detail: format!("error: {e}") });
        failed += usize::from(!out.passed);
        println!(
            "criterion {:>2} {} {name} ({:.1}s)\n    {}",
            i + 1,
            if out.passed { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            out.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed in {:.1}s", criteria.len() - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
