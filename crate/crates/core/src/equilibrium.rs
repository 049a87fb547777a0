//! Steady z-pinch: azimuthal field from pressure balance, axial current,
//! adiabatic density and the vacuum field outside the column.

use crate::error::{Error, Result};
use crate::integrate::gauss_kronrod;
use crate::profile::{PressureProfile, ProfileKind};
use serde::Serialize;

/// Absolute tolerance of the field integral.
const FIELD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub profile: PressureProfile,
    pub rw: f64,
    pub gamma: f64,
    pub entropy_a: f64,
}

/// Validate the inputs and construct the steady state.
pub fn build_equilibrium(
    profile: PressureProfile,
    rw: f64,
    gamma: f64,
    entropy_a: f64,
) -> Result<Equilibrium> {
    profile.validate()?;
    let r0 = profile.r0;
    if !(rw > r0) {
        return Err(Error::InvalidParameter(format!("wall radius rw = {rw} must exceed r0 = {r0}")));
    }
    if !(gamma > 1.0) {
        return Err(Error::InvalidParameter("gamma must exceed 1".into()));
    }
    if !(entropy_a > 0.0) {
        return Err(Error::InvalidParameter("entropy constant A must be positive".into()));
    }
    let edge = profile.p(r0);
    if edge.abs() > 1e-12 {
        return Err(Error::NonAdmissibleProfile("p(r0)≠0".into()));
    }
    for i in 0..=1000 {
        let r = r0 * i as f64 / 1000.0;
        let p = profile.p(r);
        if p < -1e-12 {
            return Err(Error::NonAdmissibleProfile(format!("p({r}) = {p} < 0")));
        }
    }
    let eq = Equilibrium { profile, rw, gamma, entropy_a };
    for i in 1..=200 {
        let r = r0 * i as f64 / 200.0;
        let v = eq.btheta_sq_over_r(r) * r;
        if v < -1e-10 {
            return Err(Error::NegativeFieldSquare { r, value: v });
        }
    }
    Ok(eq)
}

impl Equilibrium {
    pub fn r0(&self) -> f64 {
        self.profile.r0
    }

    pub fn p(&self, r: f64) -> f64 {
        if r >= self.r0() {
            0.0
        } else {
            self.profile.p(r).max(0.0)
        }
    }

    pub fn dp(&self, r: f64) -> f64 {
        self.profile.dp(r)
    }

    /// B_θ²/r = -2 ∫₀¹ t² p'(r t) dt, which stays well conditioned as r → 0.
    pub fn btheta_sq_over_r(&self, r: f64) -> f64 {
        let r = r.min(self.r0());
        if r == 0.0 {
            return 0.0;
        }
        if let ProfileKind::Parabolic { p0 } = self.profile.kind {
            return p0 * r / (self.r0() * self.r0());
        }
        -2.0 * gauss_kronrod(|t| t * t * self.profile.dp(r * t), 0.0, 1.0, FIELD_TOL)
    }

    /// Azimuthal field; beyond r0 this is the vacuum field.
    pub fn btheta(&self, r: f64) -> f64 {
        if r > self.r0() {
            return self.bhat(r);
        }
        (self.btheta_sq_over_r(r) * r).max(0.0).sqrt()
    }

    /// dB_θ/dr inside the plasma, from (B²)' = -2(p' + B²/r).
    pub fn dbtheta(&self, r: f64) -> f64 {
        if r == 0.0 {
            return (-self.profile.d2p(0.0) / 2.0).max(0.0).sqrt();
        }
        let b2r = self.btheta_sq_over_r(r);
        let b = (b2r * r).max(0.0).sqrt();
        if b == 0.0 {
            return 0.0;
        }
        -(self.dp(r) + b2r) / b
    }

    /// Axial current J_z = (1/r)(r B_θ)'.
    pub fn jz(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 2.0 * self.dbtheta(0.0);
        }
        self.dbtheta(r) + self.btheta(r) / r
    }

    pub fn rho(&self, r: f64) -> f64 {
        (self.p(r) / self.entropy_a).powf(1.0 / self.gamma)
    }

    /// Vacuum field B_θ(r0) r0 / r.
    pub fn bhat(&self, r: f64) -> f64 {
        let r0 = self.r0();
        self.btheta(r0) * r0 / r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub nonnegative: bool,
    pub zero_only_at_edge: bool,
    pub decreasing_near_edge: bool,
    pub field_square_nonnegative: bool,
    pub ratio_vanishes_at_edge: bool,
    pub reasons: Vec<String>,
}

/// Pointwise admissibility of a bare profile, usable before an equilibrium
/// can be constructed.
pub fn check_profile_admissibility(profile: &PressureProfile, tol: f64) -> AdmissibilityReport {
    let r0 = profile.r0;
    let mut reasons = Vec::new();
    let n = 1000;
    let samples: Vec<(f64, f64)> =
        (0..=n).map(|i| r0 * i as f64 / n as f64).map(|r| (r, profile.p(r))).collect();

    let nonnegative = samples.iter().all(|&(_, p)| p >= -tol);
    if !nonnegative {
        reasons.push("p<0 somewhere on [0,r0]".to_string());
    }
    let edge_zero = profile.p(r0).abs() <= tol;
    if !edge_zero {
        reasons.push("p(r0)≠0".to_string());
    }
    let interior_positive = samples[..n].iter().all(|&(_, p)| p > 0.0);
    if !interior_positive {
        reasons.push("p vanishes inside [0,r0)".to_string());
    }
    let zero_only_at_edge = edge_zero && interior_positive;

    let decreasing_near_edge = (1..=16).all(|j| profile.dp(r0 * (1.0 - j as f64 / 64.0)) <= tol);
    if !decreasing_near_edge {
        reasons.push("p' > 0 near r0".to_string());
    }

    // B_θ² r² = -2 ∫₀ʳ s² p'(s) ds accumulated along the sample grid
    let mut acc = 0.0;
    let mut field_square_nonnegative = true;
    for w in samples.windows(2) {
        let (a, b) = (w[0].0, w[1].0);
        acc += -2.0 * gauss_kronrod(|s| s * s * profile.dp(s), a, b, 1e-14);
        if acc < -tol * b * b {
            field_square_nonnegative = false;
        }
    }
    if !field_square_nonnegative {
        reasons.push("-(2/r^2) int s^2 p' ds < 0".to_string());
    }

    let ratios: Vec<f64> = (4..=20)
        .map(|j| {
            let r = r0 - r0 * 2f64.powi(-j);
            (profile.p(r) / profile.dp(r)).abs()
        })
        .collect();
    let ratio_vanishes_at_edge = ratios.iter().all(|v| v.is_finite())
        && ratios.windows(2).all(|w| w[1] < w[0])
        && *ratios.last().expect("non-empty") < tol.max(1e-5 * r0);
    if !ratio_vanishes_at_edge {
        reasons.push("p/p' does not vanish at r0".to_string());
    }

    AdmissibilityReport {
        admissible: nonnegative
            && zero_only_at_edge
            && decreasing_near_edge
            && field_square_nonnegative
            && ratio_vanishes_at_edge,
        nonnegative,
        zero_only_at_edge,
        decreasing_near_edge,
        field_square_nonnegative,
        ratio_vanishes_at_edge,
        reasons,
    }
}

pub fn check_admissibility(eq: &Equilibrium, tol: f64) -> AdmissibilityReport {
    check_profile_admissibility(&eq.profile, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub m: i64,
    pub min_value: f64,
    pub argmin: f64,
    pub drive_negative: bool,
}

/// Pointwise stability criterion of the interchange/kink type, evaluated on
/// radii strictly inside the column.
pub fn criterion_value(eq: &Equilibrium, m: i64, r: f64) -> f64 {
    let b2r = eq.btheta_sq_over_r(r);
    if m == 0 {
        let gp = eq.gamma * eq.p(r);
        let b2 = b2r * r;
        if gp + b2 == 0.0 {
            eq.dp(r)
        } else {
            eq.dp(r) + 2.0 * gp * b2r / (gp + b2)
        }
    } else {
        2.0 * eq.dp(r) + (m * m) as f64 * b2r
    }
}

pub fn criterion_scan(eq: &Equilibrium, m: i64, radii: &[f64]) -> Result<CriterionReport> {
    let r0 = eq.r0();
    if radii.is_empty() {
        return Err(Error::InvalidGrid("empty radius list".into()));
    }
    if let Some(&bad) = radii.iter().find(|&&r| r <= 0.0 || r >= r0) {
        return Err(Error::InvalidGrid(format!("radius {bad} not strictly inside (0, r0)")));
    }
    let (argmin, min_value) = radii
        .iter()
        .map(|&r| (r, criterion_value(eq, m, r)))
        .fold((f64::NAN, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    Ok(CriterionReport { m, min_value, argmin, drive_negative: min_value < 0.0 })
}
