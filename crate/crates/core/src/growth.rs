//! The curve s ↦ λ(s) and the growth-rate fixed point s = √(-λ(s)).

use crate::eigen::{smallest_eigenpair_warm, EigenOptions, EigenResult, EigenStatus};
use crate::error::{Error, Result};
use crate::forms::{ModeForms, ModePair};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthOptions {
    pub s_floor: f64,
    pub s_max: f64,
    pub lambda_zero_tol: f64,
    /// tolerance on |Φ(s*) - 1|
    pub phi_tol: f64,
    pub eigen: EigenOptions,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        Self { s_floor: 1e-6, s_max: 10.0, lambda_zero_tol: 1e-10, phi_tol: 1e-6, eigen: EigenOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthStatus {
    Unstable,
    Stable,
    Degenerate,
    Unresolved,
}

impl GrowthStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Unstable => "unstable",
            Self::Stable => "stable",
            Self::Degenerate => "degenerate",
            Self::Unresolved => "unresolved",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaSample {
    pub s: f64,
    pub lambda: f64,
    /// vᵀK1v of the M-normalized minimizer
    pub dissipation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthResult {
    pub mode: ModePair,
    pub status: GrowthStatus,
    pub s_star: f64,
    pub mu: f64,
    pub lambda_at_star: f64,
    /// every (s, λ(s)) evaluated, sorted by s
    pub lambda_samples: Vec<(f64, f64)>,
    #[serde(skip)]
    pub minimizer: Vec<f64>,
    pub fixed_point_residual: f64,
    /// ‖(K0 + μK1 + μ²M)v‖₂ / ‖v‖₂ at the fixed point
    pub quadratic_residual: f64,
    /// ‖K0‖ + μ‖K1‖ + μ²‖M‖
    pub quadratic_scale: f64,
    /// dissipation of the normalized minimizer at s*
    pub dissipation: f64,
    pub eigen_residual: f64,
    pub iterations: usize,
    pub dense_fallback: bool,
}

impl GrowthResult {
    pub fn unresolved(mode: ModePair) -> Self {
        Self {
            mode,
            status: GrowthStatus::Unresolved,
            s_star: f64::NAN,
            mu: f64::NAN,
            lambda_at_star: f64::NAN,
            lambda_samples: Vec::new(),
            minimizer: Vec::new(),
            fixed_point_residual: f64::NAN,
            quadratic_residual: f64::NAN,
            quadratic_scale: f64::NAN,
            dissipation: f64::NAN,
            eigen_residual: f64::NAN,
            iterations: 0,
            dense_fallback: false,
        }
    }

    pub fn is_resolved(&self) -> bool {
        self.status != GrowthStatus::Unresolved
    }
}

/// λ(s) on a sorted list of s values, warm-starting each solve from the
/// previous minimizer.
pub fn lambda_curve(forms: &ModeForms, s_values: &[f64], opts: &EigenOptions) -> Result<Vec<LambdaSample>> {
    if s_values.windows(2).any(|w| w[1] < w[0]) || s_values.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidParameter("s values must be positive and sorted".into()));
    }
    let mut out = Vec::with_capacity(s_values.len());
    let mut warm: Option<Vec<f64>> = None;
    for &s in s_values {
        let r = smallest_eigenpair_warm(forms, s, opts, warm.as_deref())?;
        out.push(LambdaSample { s, lambda: r.lambda, dissipation: forms.dissipation(&r.vector) });
        warm = Some(r.vector);
    }
    Ok(out)
}

/// Minimizers at the sampled s values, for callers that need the vectors.
pub fn lambda_curve_with_vectors(
    forms: &ModeForms,
    s_values: &[f64],
    opts: &EigenOptions,
) -> Result<Vec<(f64, EigenResult)>> {
    let mut out: Vec<(f64, EigenResult)> = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let warm = out.last().map(|(_, r)| r.vector.as_slice());
        let r = smallest_eigenpair_warm(forms, s, opts, warm)?;
        out.push((s, r));
    }
    Ok(out)
}

struct Tracker<'a> {
    forms: &'a ModeForms,
    opts: &'a EigenOptions,
    samples: Vec<(f64, f64)>,
    warm: Option<Vec<f64>>,
    iterations: usize,
    dense: bool,
}

impl Tracker<'_> {
    fn eval(&mut self, s: f64) -> Result<EigenResult> {
        let r = smallest_eigenpair_warm(self.forms, s, self.opts, self.warm.as_deref())?;
        self.samples.push((s, r.lambda));
        self.iterations += r.iterations;
        self.dense |= r.status == EigenStatus::DenseFallbackUsed;
        self.warm = Some(r.vector.clone());
        Ok(r)
    }
}

fn phi(s: f64, lambda: f64) -> f64 {
    if lambda < 0.0 {
        s / (-lambda).sqrt()
    } else {
        f64::INFINITY
    }
}

/// Solve s = √(-λ(s)).
///
/// The root is sought for g(s) = s² + λ(s), which is strictly increasing and
/// vanishes exactly where Φ(s) = 1. Because μ(s) = √(-λ(s)) decreases, the
/// root lies below μ(s_floor), which gives the upper end of the bracket
/// directly. Illinois-modified regula falsi refines it, with a bisection step
/// whenever an end stalls.
pub fn solve_fixed_point(forms: &ModeForms, opts: &GrowthOptions) -> Result<GrowthResult> {
    let mut tr = Tracker { forms, opts: &opts.eigen, samples: Vec::new(), warm: None, iterations: 0, dense: false };
    let r0 = tr.eval(opts.s_floor)?;
    if r0.lambda >= -opts.lambda_zero_tol {
        return Ok(finish(forms, tr, GrowthStatus::Stable, 0.0, r0, 0.0));
    }

    let (mut lo, mut g_lo) = (opts.s_floor, opts.s_floor * opts.s_floor + r0.lambda);
    let mut at_lo = r0.clone();
    if phi(opts.s_floor, r0.lambda) >= 1.0 {
        // the rate is below s_floor itself; the ideal problem closes the bracket
        let z = tr.eval(0.0)?;
        lo = 0.0;
        g_lo = z.lambda;
        at_lo = z;
    }
    let mut hi = (-r0.lambda).sqrt().min(opts.s_max);
    let r_hi = tr.eval(hi)?;
    let mut g_hi = hi * hi + r_hi.lambda;
    if g_hi < 0.0 {
        return Err(Error::BracketExhausted { s: hi, phi: phi(hi, r_hi.lambda) });
    }
    if g_hi == 0.0 {
        let res = (phi(hi, r_hi.lambda) - 1.0).abs();
        return Ok(finish(forms, tr, GrowthStatus::Unstable, hi, r_hi, res));
    }
    let mut at_hi = r_hi;

    let mut side = 0i32;
    for _ in 0..200 {
        let width = hi - lo;
        let mut s = hi - g_hi * width / (g_hi - g_lo);
        if !(s > lo && s < hi) || width < 1e-15 * hi {
            s = 0.5 * (lo + hi);
        }
        let r = tr.eval(s)?;
        let g = s * s + r.lambda;
        if r.lambda < 0.0 {
            let res = (phi(s, r.lambda) - 1.0).abs();
            if res <= opts.phi_tol {
                return Ok(finish(forms, tr, GrowthStatus::Unstable, s, r, res));
            }
        }
        if g < 0.0 {
            lo = s;
            g_lo = g;
            at_lo = r;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = s;
            g_hi = g;
            at_hi = r;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    // no admissible Φ = 1 point found: report the λ-sign boundary
    let _ = at_lo;
    let res = (phi(hi, at_hi.lambda) - 1.0).abs();
    Ok(finish(forms, tr, GrowthStatus::Degenerate, hi, at_hi, res))
}

fn finish(forms: &ModeForms, tr: Tracker<'_>, status: GrowthStatus, s_star: f64, r: EigenResult, res: f64) -> GrowthResult {
    let mut samples = tr.samples;
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    samples.dedup_by(|a, b| a.0 == b.0);
    let mu = if status == GrowthStatus::Unstable { s_star } else { 0.0 };
    let (quadratic_residual, quadratic_scale) = quadratic_residual(forms, &r.vector, mu);
    GrowthResult {
        mode: forms.mode,
        status,
        s_star,
        mu,
        lambda_at_star: r.lambda,
        lambda_samples: samples,
        dissipation: forms.dissipation(&r.vector),
        minimizer: r.vector,
        fixed_point_residual: res,
        quadratic_residual,
        quadratic_scale,
        eigen_residual: r.residual,
        iterations: tr.iterations,
        dense_fallback: tr.dense,
    }
}

/// ‖(K0 + μK1 + μ²M)v‖₂/‖v‖₂ and the matching scale ‖K0‖ + μ‖K1‖ + μ²‖M‖.
pub fn quadratic_residual(forms: &ModeForms, v: &[f64], mu: f64) -> (f64, f64) {
    let a = forms.k0.matvec(v);
    let b = forms.k1.matvec(v);
    let c = forms.mass.matvec(v);
    let r: f64 = (0..v.len()).map(|i| (a[i] + mu * b[i] + mu * mu * c[i]).powi(2)).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = forms.k0.norm_inf() + mu * forms.k1.norm_inf() + mu * mu * forms.mass.norm_inf();
    (if nv > 0.0 { r / nv } else { 0.0 }, scale)
}
