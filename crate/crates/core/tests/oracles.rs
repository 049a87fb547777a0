//! Independent reference computations checked against the library.

use zpinch::banded::BandMatrix;
use zpinch::eigen::{smallest_eigenpair, EigenOptions};
use zpinch::equilibrium::{build_equilibrium, check_admissibility, check_profile_admissibility, criterion_scan, Equilibrium};
use zpinch::evolve::integrate;
use zpinch::forms::{Discretization, FormAssembler, ModeForms, ModePair, Viscosity, XI};
use zpinch::growth::GrowthOptions;
use zpinch::profile::PressureProfile;
use zpinch::scan::{dissipation_scaling_check, scan_modes, ModeRange, ScanOptions};
use zpinch::verify::{check_force_balance, check_reflection, plasma_nodes};
use zpinch::Error;

fn parabolic() -> Equilibrium {
    build_equilibrium(PressureProfile::parabolic(1.0, 1.0), 2.0, 5.0 / 3.0, 1.0).unwrap()
}

fn assembler(eq: &Equilibrium, n: usize, visc: Viscosity) -> FormAssembler {
    let disc = Discretization { n_elements_plasma: n, n_elements_vacuum: n / 2, fem_order: 2, grading_ratio: 20.0 };
    FormAssembler::new(eq, disc, visc).unwrap()
}

const VISC: Viscosity = Viscosity { epsilon: 0.1, delta: 0.1 };

fn dense(a: &BandMatrix) -> Vec<Vec<f64>> {
    let n = a.dim();
    (0..n).map(|i| (0..n).map(|j| a.get(i, j)).collect()).collect()
}

/// Lower Cholesky factor of a dense SPD matrix.
fn cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        assert!(d > 0.0, "mass matrix not positive definite at row {j}");
        l[j][j] = d.sqrt();
        for i in j + 1..n {
            l[i][j] = (a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>()) / l[j][j];
        }
    }
    l
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest eigenvalue of the pencil (A, M): Jacobi on L⁻¹ A L⁻ᵀ.
fn reference_smallest(a: &BandMatrix, m: &BandMatrix) -> f64 {
    let l = cholesky(&dense(m));
    let a = dense(a);
    let n = a.len();
    // forward-substitute columnwise: X = L⁻¹ A, then C = X L⁻ᵀ = (L⁻¹ Xᵀ)ᵀ
    let lsolve = |b: &[f64]| {
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[i] = (b[i] - (0..i).map(|k| l[i][k] * x[k]).sum::<f64>()) / l[i][i];
        }
        x
    };
    let cols: Vec<Vec<f64>> = (0..n).map(|j| lsolve(&(0..n).map(|i| a[i][j]).collect::<Vec<_>>())).collect();
    // cols[j] is column j of L⁻¹A; rows of L⁻¹A are the columns of (L⁻¹A)ᵀ
    let c: Vec<Vec<f64>> = (0..n).map(|i| lsolve(&(0..n).map(|j| cols[j][i]).collect::<Vec<_>>())).collect();
    let sym: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| 0.5 * (c[i][j] + c[j][i])).collect()).collect();
    jacobi_eigenvalues(sym)[0]
}

#[test]
fn smallest_eigenvalue_matches_jacobi_reference() {
    let eq = parabolic();
    let asm = assembler(&eq, 12, VISC);
    for (m, k) in [(0, 1), (1, 1), (2, 1), (0, 0), (-1, 3)] {
        let forms = asm.assemble(ModePair::new(m, k)).unwrap();
        for s in [1e-3, 0.5] {
            let got = smallest_eigenpair(&forms, s, &EigenOptions::default()).unwrap().lambda;
            let want = reference_smallest(&forms.pencil(s), &forms.mass);
            assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "({m},{k}) s={s}: {got} vs {want}");
        }
    }
}

/// Rayleigh quotient of a ξ bump with the remaining unknowns chosen to
/// minimize the energy for that ξ. Any such quotient bounds λ from above.
fn trial_quotient(forms: &ModeForms, centre: f64, half_width: f64, s: f64) -> f64 {
    let a = dense(&forms.pencil(s));
    let space = &forms.space;
    let mut v = vec![0.0; forms.dim()];
    let mut fixed = vec![false; forms.dim()];
    for node in 0..space.n_nodes() {
        let x = (space.node_position(node) - centre) / half_width;
        if let Some(i) = space.dof(node, XI) {
            v[i] = if x.abs() < 1.0 { (1.0 - x * x).powi(3) } else { 0.0 };
            fixed[i] = true;
        }
    }
    let eta: Vec<usize> = (0..forms.dim()).filter(|&i| !fixed[i]).collect();
    // free part = -A_ff⁻¹ A_fξ ξ by Cholesky of the free block
    let ne = eta.len();
    let block: Vec<Vec<f64>> = eta.iter().map(|&i| eta.iter().map(|&j| a[i][j]).collect()).collect();
    let rhs: Vec<f64> = eta.iter().map(|&i| -(0..v.len()).map(|j| a[i][j] * v[j]).sum::<f64>()).collect();
    let l = cholesky(&block);
    let mut y = vec![0.0; ne];
    for i in 0..ne {
        y[i] = (rhs[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut z = vec![0.0; ne];
    for i in (0..ne).rev() {
        z[i] = (y[i] - (i + 1..ne).map(|k| l[k][i] * z[k]).sum::<f64>()) / l[i][i];
    }
    for (&i, zi) in eta.iter().zip(z) {
        v[i] = zi;
    }
    forms.energy(&v, s) / forms.constraint(&v)
}

#[test]
fn sausage_trial_function_has_negative_energy() {
    let eq = parabolic();
    let forms = assembler(&eq, 128, VISC).assemble(ModePair::new(0, 1)).unwrap();
    let radii: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    let crit = criterion_scan(&eq, 0, &radii).unwrap();
    assert!(crit.drive_negative);
    // at k = 1 the drive must act over a broad region, so the bump runs from
    // 0.4 up to the criterion argmin at the edge
    assert!(crit.argmin > 0.95);
    let s = 1e-3;
    let half_width = 0.3;
    let q = trial_quotient(&forms, 1.0 - half_width, half_width, s);
    let lambda = smallest_eigenpair(&forms, s, &EigenOptions::default()).unwrap().lambda;
    assert!(q < 0.0, "trial quotient {q}");
    assert!(lambda <= q + 1e-12 * q.abs(), "lambda {lambda} above trial quotient {q}");
}

#[test]
fn reflected_modes_share_their_forms() {
    let eq = parabolic();
    let asm = assembler(&eq, 32, VISC);
    for (m, k) in [(0, 1), (1, 0), (1, 2), (-2, 5), (3, -1)] {
        let c = check_reflection(&asm, ModePair::new(m, k)).unwrap();
        assert!(c.passed, "{}", c.line());
    }
}

#[test]
fn dissipation_of_a_frozen_vector_is_linear_in_the_viscosities() {
    let eq = parabolic();
    let mode = ModePair::new(1, 2);
    let forms_at = |epsilon, delta| assembler(&eq, 32, Viscosity { epsilon, delta }).assemble(mode).unwrap();
    let v: Vec<f64> = {
        let f = forms_at(1.0, 1.0);
        (0..f.dim()).map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4).collect()
    };
    let d = |epsilon, delta| forms_at(epsilon, delta).dissipation(&v);
    let (a, b) = (d(1.0, 1e-300), d(1e-300, 1.0));
    for (e, dl) in [(0.1, 0.1), (0.3, 2.0), (5.0, 0.02)] {
        let want = e * a + dl * b;
        assert!((d(e, dl) - want).abs() <= 1e-12 * want.abs(), "({e}, {dl})");
    }
}

#[test]
fn single_mode_scan_cannot_fit_dissipation() {
    let eq = parabolic();
    let asm = assembler(&eq, 32, VISC);
    let opts = ScanOptions { growth: GrowthOptions::default(), parallel: false, exploit_symmetry: false };
    let one = ModeRange::new(0, 0).unwrap();
    let report = scan_modes(&asm, one, ModeRange::new(1, 1).unwrap(), &opts);
    assert!(matches!(dissipation_scaling_check(&report), Err(Error::InsufficientModes { .. })));
}

#[test]
fn zero_data_stays_zero() {
    let eq = parabolic();
    let forms = assembler(&eq, 32, VISC).assemble(ModePair::new(0, 1)).unwrap();
    let z = vec![0.0; forms.dim()];
    let st = integrate(&forms, &z, &z, 1.0, 0.01).unwrap();
    assert!(st.g.iter().chain(&st.g_t).all(|&x| x == 0.0));
    assert!(st.energy_history.iter().all(|r| r.norm_m == 0.0 && r.kinetic == 0.0 && r.dissipated == 0.0));
}

#[test]
fn hollow_current_equilibrium_balances_force() {
    let prof = PressureProfile::hollow_current(0.3, 0.7, 2.0, 0.05, 1.0);
    let eq = build_equilibrium(prof, 2.0, 5.0 / 3.0, 1.0).unwrap();
    assert!(check_admissibility(&eq, 1e-12).admissible);
    let asm = assembler(&eq, 64, VISC);
    let nodes = plasma_nodes(&asm, ModePair::new(0, 1)).unwrap();
    let c = check_force_balance(&eq, &nodes, 1e-8);
    assert!(c.passed, "{}", c.line());
    for r in [0.1, 0.5, 0.9] {
        let h = 1e-5;
        let fd = ((r + h) * eq.btheta(r + h) - (r - h) * eq.btheta(r - h)) / (2.0 * h * r);
        assert!((eq.jz(r) - fd).abs() < 1e-7, "J at {r}: {} vs {fd}", eq.jz(r));
    }

    let bare = PressureProfile::hollow_current(0.3, 0.7, 2.0, 0.0, 1.0);
    assert!(!check_profile_admissibility(&bare, 1e-12).admissible);
}
