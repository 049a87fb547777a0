//! Sweeps over a rectangle of mode pairs: Λ and its argmax, reflection
//! symmetry, dissipation scaling and decay toward the rectangle boundary.

use crate::error::{Error, Result};
use crate::forms::{FormAssembler, ModePair};
use crate::growth::{solve_fixed_point, GrowthOptions, GrowthResult, GrowthStatus};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

/// Modes whose μ agree to this relative tolerance count as tied for Λ.
pub const TIE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModeRange {
    pub lo: i64,
    pub hi: i64,
}

impl ModeRange {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidParameter(format!("empty range {lo}:{hi}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, v: i64) -> bool {
        (self.lo..=self.hi).contains(&v)
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }
}

impl std::str::FromStr for ModeRange {
    type Err = Error;

    /// `a:b`, inclusive.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("range '{s}' is not of the form a:b"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let a = a.trim().parse().map_err(|_| bad())?;
        let b = b.trim().parse().map_err(|_| bad())?;
        ModeRange::new(a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanOptions {
    pub growth: GrowthOptions,
    pub parallel: bool,
    /// solve one mode of each reflected pair inside the rectangle and mirror it
    pub exploit_symmetry: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipationEntry {
    pub m: i64,
    pub k: i64,
    pub dissipation: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub m_range: ModeRange,
    pub k_range: ModeRange,
    pub modes: Vec<GrowthResult>,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub argmax: Option<ModePair>,
    pub argmax_interior: bool,
    pub rectangle_too_small: bool,
    pub dissipation_table: Vec<DissipationEntry>,
    /// μ on the boundary of the rectangle
    pub decay_profile: Vec<(ModePair, f64)>,
    pub unresolved: Vec<ModePair>,
    /// max |μ(m,k) - μ(-m,-k)| / max(Λ, 1) over independently solved pairs
    pub symmetry_defect: f64,
    /// μ(0,k) nonincreasing in |k| beyond the argmax; reported, not enforced
    pub ray_monotone: bool,
    pub failures: Vec<String>,
}

impl ScanReport {
    pub fn get(&self, mode: ModePair) -> Option<&GrowthResult> {
        self.modes.iter().find(|r| r.mode == mode)
    }

    fn on_boundary(&self, mode: ModePair) -> bool {
        mode.m == self.m_range.lo || mode.m == self.m_range.hi || mode.k == self.k_range.lo || mode.k == self.k_range.hi
    }
}

fn tie_key(mode: ModePair) -> (u64, u64, i64, i64) {
    (mode.m.unsigned_abs(), mode.k.unsigned_abs(), mode.m, mode.k)
}

/// Solve every mode of the rectangle. Failures of individual modes never
/// abort the scan; they are recorded as unresolved.
pub fn scan_modes(asm: &FormAssembler, m_range: ModeRange, k_range: ModeRange, opts: &ScanOptions) -> ScanReport {
    let all: Vec<ModePair> =
        m_range.iter().flat_map(|m| k_range.iter().map(move |k| ModePair::new(m, k))).collect();
    let mirrored = |p: &ModePair| {
        let r = p.reflected();
        opts.exploit_symmetry && m_range.contains(r.m) && k_range.contains(r.k) && r < *p
    };
    let todo: Vec<ModePair> = all.iter().copied().filter(|p| !mirrored(p)).collect();

    let solve = |mode: ModePair| -> GrowthResult {
        asm.assemble(mode)
            .and_then(|f| solve_fixed_point(&f, &opts.growth))
            .unwrap_or_else(|_| GrowthResult::unresolved(mode))
    };
    let solved: Vec<GrowthResult> =
        if opts.parallel { todo.par_iter().map(|&p| solve(p)).collect() } else { todo.iter().map(|&p| solve(p)).collect() };
    let mut by_mode: BTreeMap<ModePair, GrowthResult> = solved.into_iter().map(|r| (r.mode, r)).collect();
    for p in all.iter().filter(|p| mirrored(p)) {
        let mut r = by_mode[&p.reflected()].clone();
        r.mode = *p;
        if !r.minimizer.is_empty() {
            if let Ok(f) = asm.assemble(*p) {
                let signs = f.reflection_signs();
                r.minimizer.iter_mut().zip(&signs).for_each(|(x, s)| *x *= s);
            }
        }
        by_mode.insert(*p, r);
    }
    let modes: Vec<GrowthResult> = all.iter().map(|p| by_mode.remove(p).expect("every mode solved")).collect();
    summarize(m_range, k_range, modes, opts.exploit_symmetry)
}

fn summarize(m_range: ModeRange, k_range: ModeRange, modes: Vec<GrowthResult>, mirrored: bool) -> ScanReport {
    let resolved = || modes.iter().filter(|r| r.is_resolved());
    let lambda = resolved().map(|r| r.mu).fold(0.0, f64::max);
    let argmax = if lambda > 0.0 {
        resolved()
            .filter(|r| r.mu >= lambda * (1.0 - TIE_TOL))
            .map(|r| r.mode)
            .min_by_key(|&p| tie_key(p))
    } else {
        None
    };
    let unresolved: Vec<ModePair> = modes.iter().filter(|r| !r.is_resolved()).map(|r| r.mode).collect();
    let dissipation_table = resolved()
        .map(|r| DissipationEntry {
            m: r.mode.m,
            k: r.mode.k,
            dissipation: r.dissipation,
            weight: (r.mode.m * r.mode.m + r.mode.k * r.mode.k) as f64,
        })
        .collect();

    let mut symmetry_defect: f64 = 0.0;
    if !mirrored {
        for r in resolved() {
            let q = r.mode.reflected();
            if let Some(o) = modes.iter().find(|o| o.mode == q && o.is_resolved()) {
                symmetry_defect = symmetry_defect.max((r.mu - o.mu).abs() / lambda.max(1.0));
            }
        }
    }

    let mut report = ScanReport {
        m_range,
        k_range,
        lambda,
        argmax,
        argmax_interior: false,
        rectangle_too_small: false,
        dissipation_table,
        decay_profile: Vec::new(),
        unresolved,
        symmetry_defect,
        ray_monotone: true,
        failures: Vec::new(),
        modes,
    };
    report.decay_profile = report
        .modes
        .iter()
        .filter(|r| report.on_boundary(r.mode))
        .map(|r| (r.mode, r.mu))
        .collect();
    if let Some(a) = argmax {
        report.argmax_interior = !report.on_boundary(a);
        let max_boundary = report.decay_profile.iter().map(|x| x.1).filter(|m| m.is_finite()).fold(0.0, f64::max);
        report.rectangle_too_small = !report.argmax_interior || max_boundary >= 0.5 * lambda;
        if report.rectangle_too_small {
            report.failures.push("rectangle too small: boundary growth rates reach half of Lambda".into());
        }
        for n in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let q = ModePair::new(a.m + n.0, a.k + n.1);
            if report.unresolved.contains(&q) {
                report.failures.push(format!("mode {q} adjacent to the argmax {a} is unresolved"));
            }
        }
        report.ray_monotone = ray_monotone(&report, a);
    }
    report
}

fn ray_monotone(report: &ScanReport, argmax: ModePair) -> bool {
    let kmax = argmax.k.unsigned_abs() as i64;
    [1i64, -1].iter().all(|&sign| {
        let ray: Vec<f64> = (kmax..)
            .map(|k| ModePair::new(0, sign * k))
            .take_while(|p| report.k_range.contains(p.k))
            .filter_map(|p| report.get(p).filter(|r| r.is_resolved()).map(|r| r.mu))
            .collect();
        ray.windows(2).all(|w| w[1] <= w[0] * (1.0 + TIE_TOL))
    })
}

/// Lower affine envelope D ≥ c·w - C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeFit {
    pub c: f64,
    #[serde(rename = "C")]
    pub offset: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    /// modes with |m| ≠ 1 against m² + k²
    pub general: EnvelopeFit,
    /// |m| = 1 against k², when enough such modes were scanned
    pub kink: Option<EnvelopeFit>,
}

/// Supporting line of the lower convex hull of (w, D) at the mean abscissa:
/// among all lines lying below every point it is the one of least total gap.
pub fn lower_envelope(points: &[(f64, f64)]) -> Option<EnvelopeFit> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup_by(|a, b| a.0 == b.0);
    if pts.len() < 2 {
        return None;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let mean = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    let edge = hull.windows(2).find(|e| mean <= e[1].0).unwrap_or(&hull[hull.len() - 2..]);
    let c = (edge[1].1 - edge[0].1) / (edge[1].0 - edge[0].0);
    Some(EnvelopeFit { c, offset: c * edge[0].0 - edge[0].1, points: points.len() })
}

pub fn dissipation_scaling_check(report: &ScanReport) -> Result<FitResult> {
    let general: Vec<(f64, f64)> = report
        .dissipation_table
        .iter()
        .filter(|e| e.m.abs() != 1 && e.dissipation.is_finite())
        .map(|e| (e.weight, e.dissipation))
        .collect();
    if general.len() < 6 {
        return Err(Error::InsufficientModes { needed: 6, got: general.len() });
    }
    let general = lower_envelope(&general).ok_or(Error::InsufficientModes { needed: 2, got: 1 })?;
    let kink: Vec<(f64, f64)> = report
        .dissipation_table
        .iter()
        .filter(|e| e.m.abs() == 1 && e.dissipation.is_finite())
        .map(|e| ((e.k * e.k) as f64, e.dissipation))
        .collect();
    Ok(FitResult { general, kink: lower_envelope(&kink) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub passed: bool,
    pub max_boundary_mu: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub stable_only: bool,
    /// max over unstable modes of μ·(c·w - C)⁺, the empirical constant of μ ≤ const/D
    pub hyperbola_constant: Option<f64>,
    pub diagnostic: String,
}

pub fn decay_check(report: &ScanReport, fit: Option<&FitResult>) -> DecayReport {
    let max_boundary_mu = report.decay_profile.iter().map(|x| x.1).filter(|m| m.is_finite()).fold(0.0, f64::max);
    let hyperbola_constant = fit.map(|f| {
        report
            .modes
            .iter()
            .filter(|r| r.status == GrowthStatus::Unstable)
            .map(|r| {
                let (m, k) = (r.mode.m as f64, r.mode.k as f64);
                let bound = if r.mode.m.abs() == 1 {
                    f.kink.map_or(0.0, |e| e.c * k * k - e.offset)
                } else {
                    f.general.c * (m * m + k * k) - f.general.offset
                };
                r.mu * bound.max(0.0)
            })
            .fold(0.0, f64::max)
    });
    if report.lambda == 0.0 {
        return DecayReport {
            passed: true,
            max_boundary_mu,
            lambda: 0.0,
            stable_only: true,
            hyperbola_constant,
            diagnostic: "no unstable mode in the rectangle; Lambda = 0".into(),
        };
    }
    let passed = max_boundary_mu <= 0.5 * report.lambda;
    let diagnostic = if passed {
        format!("max boundary mu {max_boundary_mu:.6e} <= 0.5 Lambda = {:.6e}", 0.5 * report.lambda)
    } else {
        format!("max boundary mu {max_boundary_mu:.6e} exceeds 0.5 Lambda = {:.6e}; enlarge the rectangle", 0.5 * report.lambda)
    };
    DecayReport { passed, max_boundary_mu, lambda: report.lambda, stable_only: false, hyperbola_constant, diagnostic }
}
