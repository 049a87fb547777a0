//! Smallest eigenpair of the symmetric pencil (K0 + sK1, M).
//!
//! The iterative path is shift-invert Lanczos in the M inner product with full
//! reorthogonalization. Every shift is certified to lie below the spectrum by
//! a successful banded Cholesky of `A - σM`, so the dominant Ritz value of the
//! inverted operator is always the algebraically smallest eigenvalue.

use crate::banded::{BandCholesky, BandMatrix};
use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::forms::{dissipation_terms, ideal_terms, ModeForms, Sample, TWO_PI_SQ};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// residual tolerance relative to ‖K0‖ + s‖K1‖
    pub tol: f64,
    pub max_iter: usize,
    /// largest system for which the dense fallback is attempted
    pub dense_threshold: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 500, dense_threshold: 600 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EigenStatus {
    Converged,
    DenseFallbackUsed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenResult {
    pub lambda: f64,
    /// M-normalized, largest-magnitude entry positive
    pub vector: Vec<f64>,
    /// ‖(A - λM)v‖₂ / ‖v‖₂
    pub residual: f64,
    pub iterations: usize,
    pub status: EigenStatus,
    /// estimate of the second-smallest eigenvalue, when available
    pub next_lambda: Option<f64>,
    pub degenerate: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual_of(a: &BandMatrix, m: &BandMatrix, v: &[f64], lambda: f64) -> f64 {
    let av = a.matvec(v);
    let mv = m.matvec(v);
    let r: Vec<f64> = av.iter().zip(&mv).map(|(x, y)| x - lambda * y).collect();
    norm(&r) / norm(v)
}

/// M-normalize and fix the sign so that the largest-magnitude entry is positive.
pub fn normalize(m: &BandMatrix, v: &mut [f64]) {
    let nm = m.quad(v).max(0.0).sqrt();
    if nm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nm);
    }
    let big = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if big < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn factor_shifted(a: &BandMatrix, m: &BandMatrix, sigma: f64) -> Option<BandCholesky> {
    a.combine(1.0, m, -sigma).cholesky().ok()
}

/// Find a shift strictly below the spectrum, starting from the upper bound `upper`.
fn certified_shift(a: &BandMatrix, m: &BandMatrix, upper: f64, first_gap: f64) -> (f64, BandCholesky) {
    let mut gap = first_gap.max(1e-12 * (1.0 + upper.abs()));
    loop {
        let sigma = upper - gap;
        if let Some(ch) = factor_shifted(a, m, sigma) {
            return (sigma, ch);
        }
        gap *= 4.0;
    }
}

struct Cycle {
    /// Ritz values of the original pencil, ascending
    lambdas: Vec<f64>,
    vector: Vec<f64>,
    steps: usize,
}

fn lanczos_cycle(chol: &BandCholesky, m: &BandMatrix, sigma: f64, start: &[f64], kmax: usize) -> Cycle {
    let n = start.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(kmax + 1);
    let mut mq: Vec<Vec<f64>> = Vec::with_capacity(kmax + 1);
    let mut alpha = Vec::with_capacity(kmax);
    let mut beta: Vec<f64> = Vec::with_capacity(kmax);

    let mut v = start.to_vec();
    let mut mv = m.matvec(&v);
    let nv = dot(&v, &mv).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    mv.iter_mut().for_each(|x| *x /= nv);
    q.push(v);
    mq.push(mv);

    let mut steps = 0;
    for j in 0..kmax.min(n) {
        steps += 1;
        let mut w = chol.solve(&mq[j]);
        let a = dot(&mq[j], &w);
        alpha.push(a);
        for _ in 0..2 {
            for i in 0..=j {
                let c = dot(&mq[i], &w);
                w.iter_mut().zip(&q[i]).for_each(|(x, y)| *x -= c * y);
            }
        }
        let mw = m.matvec(&w);
        let b = dot(&w, &mw).max(0.0).sqrt();
        if b <= 1e-13 * a.abs().max(f64::MIN_POSITIVE) || j + 1 == kmax.min(n) {
            break;
        }
        beta.push(b);
        q.push(w.iter().map(|x| x / b).collect());
        mq.push(mw.iter().map(|x| x / b).collect());
    }

    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let top = order[0];
    let mut y = vec![0.0; n];
    for i in 0..k {
        let c = eig.eigenvectors[(i, top)];
        y.iter_mut().zip(&q[i]).for_each(|(acc, qi)| *acc += c * qi);
    }
    let lambdas = order
        .iter()
        .map(|&i| eig.eigenvalues[i])
        .filter(|&th| th > 0.0)
        .map(|th| sigma + 1.0 / th)
        .collect();
    Cycle { lambdas, vector: y, steps }
}

fn deterministic_start(n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Smallest eigenpair of (a, m) by shift-invert Lanczos; `scale` sets the
/// residual tolerance. Does not fall back to the dense path.
pub fn lanczos_smallest(
    a: &BandMatrix,
    m: &BandMatrix,
    scale: f64,
    opts: &EigenOptions,
    warm: Option<&[f64]>,
) -> Result<EigenResult> {
    let n = a.dim();
    if m.dim() != n {
        return Err(Error::Dimension(format!("pencil sizes {n} and {}", m.dim())));
    }
    // A warm start is blended with a fixed random vector: a pure warm start
    // can sit inside an invariant subspace (for m = 0 the ζ block decouples)
    // and would never see the true minimizer.
    let mut x = deterministic_start(n);
    if let Some(w) = warm.filter(|w| w.len() == n && m.quad(w) > 0.0) {
        let nw = m.quad(w).sqrt();
        let nx = m.quad(&x).sqrt();
        x.iter_mut().zip(w).for_each(|(xi, wi)| *xi = wi / nw + 1e-3 * *xi / nx);
    }
    let rq = a.quad(&x) / m.quad(&x);
    let (mut sigma, mut chol) = certified_shift(a, m, rq, 1e-2 * (1.0 + rq.abs()));

    let kmax = 40.min(n.max(1));
    let mut iterations = 0;
    let mut best: Option<EigenResult> = None;
    while iterations < opts.max_iter {
        let cycle = lanczos_cycle(&chol, m, sigma, &x, kmax.min(opts.max_iter - iterations).max(1));
        iterations += cycle.steps;
        let mut v = cycle.vector;
        normalize(m, &mut v);
        let lambda = a.quad(&v);
        let residual = residual_of(a, m, &v, lambda);
        let next = cycle.lambdas.get(1).copied();
        let candidate = EigenResult {
            lambda,
            vector: v.clone(),
            residual,
            iterations,
            status: EigenStatus::Converged,
            next_lambda: next,
            degenerate: next.is_some_and(|l2| (l2 - lambda).abs() <= 1e-8 * lambda.abs().max(1.0)),
        };
        let done = residual <= opts.tol * scale;
        if best.as_ref().map_or(true, |b| residual < b.residual) {
            best = Some(candidate);
        }
        if done {
            let mut out = best.expect("set above");
            out.iterations = iterations;
            return Ok(out);
        }
        x = v;
        // move the shift toward the current estimate, keeping it certified
        let spread = next.map_or(1.0 + lambda.abs(), |l2| (l2 - lambda).max(0.0));
        let gap = (0.1 * spread).max(1e-10 * (1.0 + lambda.abs()));
        if lambda - gap > sigma {
            let (s2, c2) = certified_shift(a, m, lambda, gap);
            if s2 > sigma {
                sigma = s2;
                chol = c2;
            }
        }
    }
    let residual = best.as_ref().map_or(f64::INFINITY, |b| b.residual);
    Err(Error::NoConvergence { iterations, residual })
}

/// Dense reference path: Cholesky of M, symmetric eigendecomposition of
/// L⁻¹ A L⁻ᵀ.
pub fn dense_smallest(a: &BandMatrix, m: &BandMatrix) -> Result<EigenResult> {
    let n = a.dim();
    let md = m.to_dense();
    let chol = md.clone().cholesky().ok_or(Error::NotPositiveDefinite { row: 0, pivot: f64::NAN })?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or(Error::NotPositiveDefinite { row: 0, pivot: 0.0 })?;
    let c = &linv * a.to_dense() * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let i0 = order[0];
    let u = eig.eigenvectors.column(i0).clone_owned();
    let y = linv.transpose() * u;
    let mut v: Vec<f64> = y.iter().copied().collect();
    normalize(m, &mut v);
    let lambda = eig.eigenvalues[i0];
    let next = order.get(1).map(|&i| eig.eigenvalues[i]);
    Ok(EigenResult {
        lambda,
        residual: residual_of(a, m, &v, lambda),
        vector: v,
        iterations: 0,
        status: EigenStatus::DenseFallbackUsed,
        next_lambda: next,
        degenerate: next.is_some_and(|l2| (l2 - lambda).abs() <= 1e-8 * lambda.abs().max(1.0)),
    })
}

/// λ(s) and its minimizer for one mode.
pub fn smallest_eigenpair(forms: &ModeForms, s: f64, opts: &EigenOptions) -> Result<EigenResult> {
    smallest_eigenpair_warm(forms, s, opts, None)
}

pub fn smallest_eigenpair_warm(
    forms: &ModeForms,
    s: f64,
    opts: &EigenOptions,
    warm: Option<&[f64]>,
) -> Result<EigenResult> {
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter(format!("viscosity scale s = {s} must be nonnegative")));
    }
    let a = forms.pencil(s);
    let scale = forms.scale(s);
    match lanczos_smallest(&a, &forms.mass, scale, opts, warm) {
        Ok(r) => Ok(r),
        Err(Error::NoConvergence { .. }) if forms.dim() <= opts.dense_threshold => {
            dense_smallest(&a, &forms.mass)
        }
        Err(e) => Err(e),
    }
}

/// Strong-form residuals of the Euler–Lagrange system of a computed minimizer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    /// L²(r dr) norms of the interior residual per field (ξ, η, ζ)
    pub interior: [f64; 3],
    /// natural interface conditions at r0 per field
    pub interface: [f64; 3],
}

impl ResidualReport {
    pub fn interior_total(&self) -> f64 {
        self.interior.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Flux (coefficient of δu') and source (coefficient of δu) of the energy
/// density at radius r in element e.
fn flux_source(forms: &ModeForms, eq: &Equilibrium, v: &[f64], s: f64, e: usize, r: f64) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let sample = Sample::at(eq, r);
    let mut u = [0.0; 3];
    let mut du = [0.0; 3];
    for c in 0..3 {
        let (val, der) = forms.space.eval(v, e, c, r);
        u[c] = val;
        du[c] = der;
    }
    let mut flux = [0.0; 3];
    let mut source = [0.0; 3];
    let ideal = ideal_terms(forms.mode, &sample);
    let visc = dissipation_terms(forms.mode, forms.viscosity, &sample);
    let all = ideal.iter().map(|t| (t, 1.0)).chain(visc.iter().map(|t| (t, s)));
    for (t, f) in all {
        let l = t.combination(u, du) * t.weight * f;
        for c in 0..3 {
            flux[c] += t.a[c] * l;
            source[c] += t.b[c] * l;
        }
    }
    (flux, source, u)
}

/// Pointwise interior residual `-F' + S - λ 2π² ρ r u`, scaled by
/// 1/(2π² r), at each element midpoint: (midpoint, element width, residual).
/// Flux derivatives use a five-point stencil inside the element, where the
/// discrete field is polynomial.
pub fn euler_lagrange_profile(
    forms: &ModeForms,
    eq: &Equilibrium,
    result: &EigenResult,
    s: f64,
) -> Vec<(f64, f64, [f64; 3])> {
    let v = &result.vector[..forms.n_plasma];
    let grid = &forms.space.grid;
    (0..grid.n_elements())
        .map(|e| {
            let (a, b) = (grid.nodes[e], grid.nodes[e + 1]);
            let he = b - a;
            let mid = 0.5 * (a + b);
            let h = 0.05 * he;
            let fl = |r: f64| flux_source(forms, eq, v, s, e, r).0;
            let (f1, f2, f3, f4) = (fl(mid - 2.0 * h), fl(mid - h), fl(mid + h), fl(mid + 2.0 * h));
            let (_, src, u) = flux_source(forms, eq, v, s, e, mid);
            let w = TWO_PI_SQ * eq.rho(mid) * mid;
            let mut res = [0.0; 3];
            for c in 0..3 {
                let df = (f1[c] - 8.0 * f2[c] + 8.0 * f3[c] - f4[c]) / (12.0 * h);
                res[c] = (-df + src[c] - result.lambda * w * u[c]) / (TWO_PI_SQ * mid);
            }
            (mid, he, res)
        })
        .collect()
}

/// L²(r dr) norms of the interior residual (midpoint rule over elements) and
/// the natural interface conditions at r0.
pub fn verify_minimizer_euler_lagrange(
    forms: &ModeForms,
    eq: &Equilibrium,
    result: &EigenResult,
    s: f64,
) -> ResidualReport {
    let mut acc = [0.0; 3];
    for (mid, he, res) in euler_lagrange_profile(forms, eq, result, s) {
        for c in 0..3 {
            acc[c] += he * mid * res[c] * res[c];
        }
    }
    let v = &result.vector[..forms.n_plasma];
    let last = forms.space.grid.n_elements() - 1;
    let r0 = eq.r0();
    let (flux, _, u) = flux_source(forms, eq, v, s, last, r0);
    let mut interface = [0.0; 3];
    for c in 0..3 {
        interface[c] = flux[c] / (TWO_PI_SQ * r0);
    }
    interface[0] += forms.vacuum_weight * u[0] / (TWO_PI_SQ * r0);
    ResidualReport { interior: acc.map(f64::sqrt), interface: interface.map(f64::abs) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_spd(n: usize, seed: u64, kd: usize) -> BandMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = BandMatrix::zeros(n, kd);
        for i in 0..n {
            for j in i.saturating_sub(kd)..i {
                let x = rng.gen_range(-1.0..1.0);
                a.add(i, j, x);
                a.add(j, i, x);
            }
            a.add(i, i, 2.0 * kd as f64 + 1.0 + rng.gen_range(0.0..1.0));
        }
        a
    }

    fn random_sym(n: usize, seed: u64, kd: usize) -> BandMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = BandMatrix::zeros(n, kd);
        for i in 0..n {
            for j in i.saturating_sub(kd)..=i {
                let x = rng.gen_range(-1.0..1.0);
                a.add(i, j, x);
                if i != j {
                    a.add(j, i, x);
                }
            }
        }
        a
    }

    #[test]
    fn identity_pencil() {
        let i = BandMatrix::identity(7);
        let r = lanczos_smallest(&i, &i, 1.0, &EigenOptions::default(), None).unwrap();
        assert!((r.lambda - 1.0).abs() < 1e-14);
        assert!(r.residual < 1e-14);
    }

    #[test]
    fn lanczos_matches_dense_on_random_pencil() {
        for seed in 0..4 {
            let a = random_sym(50, seed, 3);
            let m = random_spd(50, seed + 100, 2);
            let it = lanczos_smallest(&a, &m, a.norm_inf(), &EigenOptions::default(), None).unwrap();
            let de = dense_smallest(&a, &m).unwrap();
            assert!((it.lambda - de.lambda).abs() < 1e-10 * (1.0 + de.lambda.abs()));
            assert!((m.quad(&it.vector) - 1.0).abs() < 1e-10);
        }
    }
}
