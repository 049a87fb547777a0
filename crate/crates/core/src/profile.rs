//! Radial pressure profiles with exact first and second derivatives.

use crate::error::{Error, Result};
use crate::integrate::gauss_kronrod;
use serde::{Deserialize, Serialize};

/// Dense polynomial in monomial basis, lowest degree first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Poly(Vec<f64>);

impl Poly {
    fn mul(&self, other: &Poly) -> Poly {
        let mut c = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly(c)
    }

    fn pow(&self, n: u32) -> Poly {
        let mut out = Poly(vec![1.0]);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    fn scale(mut self, s: f64) -> Poly {
        self.0.iter_mut().for_each(|c| *c *= s);
        self
    }

    fn antiderivative(&self) -> Poly {
        let mut c = vec![0.0; self.0.len() + 1];
        for (i, a) in self.0.iter().enumerate() {
            c[i + 1] = a / (i as f64 + 1.0);
        }
        Poly(c)
    }

    fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

/// Current-bump equilibrium: J_z is a C² bump supported on `[a, b]`, the
/// pressure follows from p' = -B_θ J_z integrated inward from p(r0) = 0, and
/// an additive pedestal `pedestal * (1 - (r/r0)²)` keeps p positive inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HollowCurrent {
    pub a: f64,
    pub b: f64,
    pub j0: f64,
    pub pedestal: f64,
    // peak normalisation of ((s - a)(b - s))^3
    scale: f64,
    // antiderivative of s J(s) in t = s - a, vanishing at t = 0
    enclosed: Poly,
}

impl HollowCurrent {
    pub fn new(a: f64, b: f64, j0: f64, pedestal: f64) -> Self {
        let w = b - a;
        let scale = j0 / (0.5 * w).powi(6);
        // J in the shifted variable is scale (t (w - t))^3; the shift keeps the
        // small values near t = 0 free of cancellation
        let current = Poly(vec![0.0, w, -1.0]).pow(3).scale(scale);
        let enclosed = Poly(vec![a, 1.0]).mul(&current).antiderivative();
        Self { a, b, j0, pedestal, scale, enclosed }
    }

    pub fn current(&self, r: f64) -> f64 {
        if r <= self.a || r >= self.b {
            0.0
        } else {
            self.scale * ((r - self.a) * (self.b - r)).powi(3)
        }
    }

    fn current_slope(&self, r: f64) -> f64 {
        if r <= self.a || r >= self.b {
            0.0
        } else {
            let q = (r - self.a) * (self.b - r);
            3.0 * self.scale * q * q * (self.a + self.b - 2.0 * r)
        }
    }

    /// Field generated by the bump alone, (1/r) ∫₀ʳ s J(s) ds.
    pub fn bump_field(&self, r: f64) -> f64 {
        if r <= self.a {
            0.0
        } else {
            self.enclosed.eval(r.min(self.b) - self.a) / r
        }
    }

    fn bump_pressure(&self, r: f64) -> f64 {
        let lo = r.max(self.a);
        if lo >= self.b {
            return 0.0;
        }
        gauss_kronrod(|s| self.bump_field(s) * self.current(s), lo, self.b, 1e-14)
    }
}

/// Clamped cubic spline through tabulated (r, p) samples; end slopes are taken
/// from one-sided three-point differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureTable {
    r: Vec<f64>,
    p: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl PressureTable {
    pub fn new(r: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let n = r.len();
        if n < 4 || p.len() != n {
            return Err(Error::InvalidParameter(
                "pressure table needs at least 4 (r, p) pairs of equal length".into(),
            ));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("pressure table radii must increase".into()));
        }
        let h: Vec<f64> = r.windows(2).map(|w| w[1] - w[0]).collect();
        let one_sided = |i0: usize, i1: usize, i2: usize| {
            // derivative at r[i0] of the quadratic through three knots
            let (x0, x1, x2) = (r[i0], r[i1], r[i2]);
            let (y0, y1, y2) = (p[i0], p[i1], p[i2]);
            y0 * ((x0 - x1) + (x0 - x2)) / ((x0 - x1) * (x0 - x2))
                + y1 * (x0 - x2) / ((x1 - x0) * (x1 - x2))
                + y2 * (x0 - x1) / ((x2 - x0) * (x2 - x1))
        };
        let d0 = one_sided(0, 1, 2);
        let dn = one_sided(n - 1, n - 2, n - 3);

        // tridiagonal system for the knot second derivatives
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = h[0] / 3.0;
        sup[0] = h[0] / 6.0;
        rhs[0] = (p[1] - p[0]) / h[0] - d0;
        for i in 1..n - 1 {
            sub[i] = h[i - 1] / 6.0;
            diag[i] = (h[i - 1] + h[i]) / 3.0;
            sup[i] = h[i] / 6.0;
            rhs[i] = (p[i + 1] - p[i]) / h[i] - (p[i] - p[i - 1]) / h[i - 1];
        }
        sub[n - 1] = h[n - 2] / 6.0;
        diag[n - 1] = h[n - 2] / 3.0;
        rhs[n - 1] = dn - (p[n - 1] - p[n - 2]) / h[n - 2];
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
        }
        Ok(Self { r, p, m })
    }

    fn locate(&self, x: f64) -> usize {
        let n = self.r.len();
        match self.r.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value, first and second derivative.
    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let i = self.locate(x);
        let (x0, x1) = (self.r[i], self.r[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.p[i], self.p[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (y1 - y0) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let dd = a * m0 + b * m1;
        (v, d, dd)
    }

    pub fn end(&self) -> f64 {
        *self.r.last().expect("non-empty")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProfileKind {
    /// p0 (1 - (r/r0)²)
    Parabolic { p0: f64 },
    /// p0 (1 - (r/r0)²)^n
    PowerLaw { p0: f64, exponent: f64 },
    HollowCurrent(HollowCurrent),
    Table(PressureTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureProfile {
    pub kind: ProfileKind,
    pub r0: f64,
}

impl PressureProfile {
    pub fn parabolic(p0: f64, r0: f64) -> Self {
        Self { kind: ProfileKind::Parabolic { p0 }, r0 }
    }

    pub fn power_law(p0: f64, exponent: f64, r0: f64) -> Self {
        Self { kind: ProfileKind::PowerLaw { p0, exponent }, r0 }
    }

    pub fn hollow_current(a: f64, b: f64, j0: f64, pedestal: f64, r0: f64) -> Self {
        Self { kind: ProfileKind::HollowCurrent(HollowCurrent::new(a, b, j0, pedestal)), r0 }
    }

    /// Tabulated profile; the plasma radius is the last tabulated radius.
    pub fn table(r: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let t = PressureTable::new(r, p)?;
        let r0 = t.end();
        Ok(Self { kind: ProfileKind::Table(t), r0 })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProfileKind::Parabolic { .. } => "parabolic",
            ProfileKind::PowerLaw { .. } => "powerlaw",
            ProfileKind::HollowCurrent(_) => "hollow-current",
            ProfileKind::Table(_) => "table",
        }
    }

    /// Parameter sanity (sign and range of the profile constants).
    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0) || !self.r0.is_finite() {
            return Err(Error::InvalidParameter(format!("r0 must be positive, got {}", self.r0)));
        }
        match &self.kind {
            ProfileKind::Parabolic { p0 } if !(*p0 > 0.0) => {
                Err(Error::InvalidParameter("parabolic p0 must be positive".into()))
            }
            ProfileKind::PowerLaw { p0, exponent } => {
                if !(*p0 > 0.0) {
                    Err(Error::InvalidParameter("powerlaw p0 must be positive".into()))
                } else if !(*exponent == 1.0 || *exponent >= 2.0) {
                    Err(Error::InvalidParameter(
                        "powerlaw exponent must be 1 or at least 2 for a C² profile".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            ProfileKind::HollowCurrent(h) => {
                if !(0.0 < h.a && h.a < h.b && h.b < self.r0) {
                    Err(Error::InvalidParameter("hollow-current needs 0 < a < b < r0".into()))
                } else if !(h.j0 > 0.0) || h.pedestal < 0.0 {
                    Err(Error::InvalidParameter(
                        "hollow-current needs j0 > 0 and pedestal >= 0".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            ProfileKind::Table(t) => {
                if t.r[0] != 0.0 {
                    Err(Error::InvalidParameter("pressure table must start at r = 0".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn p(&self, r: f64) -> f64 {
        let x = r / self.r0;
        match &self.kind {
            ProfileKind::Parabolic { p0 } => p0 * (1.0 - x * x),
            ProfileKind::PowerLaw { p0, exponent } => {
                let base = 1.0 - x * x;
                if base <= 0.0 {
                    0.0
                } else {
                    p0 * base.powf(*exponent)
                }
            }
            ProfileKind::HollowCurrent(h) => h.bump_pressure(r) + h.pedestal * (1.0 - x * x),
            ProfileKind::Table(t) => t.eval(r).0,
        }
    }

    pub fn dp(&self, r: f64) -> f64 {
        let x = r / self.r0;
        match &self.kind {
            ProfileKind::Parabolic { p0 } => -2.0 * p0 * x / self.r0,
            ProfileKind::PowerLaw { p0, exponent } => {
                let base = 1.0 - x * x;
                if base <= 0.0 && *exponent > 1.0 {
                    0.0
                } else {
                    -2.0 * p0 * exponent * x / self.r0 * base.max(0.0).powf(exponent - 1.0)
                }
            }
            ProfileKind::HollowCurrent(h) => {
                -h.bump_field(r) * h.current(r) - 2.0 * h.pedestal * x / self.r0
            }
            ProfileKind::Table(t) => t.eval(r).1,
        }
    }

    pub fn d2p(&self, r: f64) -> f64 {
        let x = r / self.r0;
        let r02 = self.r0 * self.r0;
        match &self.kind {
            ProfileKind::Parabolic { p0 } => -2.0 * p0 / r02,
            ProfileKind::PowerLaw { p0, exponent } => {
                let n = *exponent;
                let base = (1.0 - x * x).max(0.0);
                let first = if n == 1.0 {
                    0.0
                } else {
                    n * (n - 1.0) * base.powf(n - 2.0) * 4.0 * x * x / r02
                };
                p0 * (first - 2.0 * n * base.powf(n - 1.0) / r02)
            }
            ProfileKind::HollowCurrent(h) => {
                let bf = h.bump_field(r);
                let j = h.current(r);
                let dbf = if r > 0.0 { j - bf / r } else { 0.0 };
                -(dbf * j + bf * h.current_slope(r)) - 2.0 * h.pedestal / r02
            }
            ProfileKind::Table(t) => t.eval(r).2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let profiles = [
            PressureProfile::parabolic(1.3, 1.0),
            PressureProfile::power_law(1.0, 2.0, 1.5),
            PressureProfile::power_law(2.0, 3.5, 1.0),
            PressureProfile::hollow_current(0.3, 0.7, 1.0, 0.05, 1.0),
        ];
        for prof in &profiles {
            for &x in &[0.1, 0.35, 0.5, 0.62, 0.9] {
                let r = x * prof.r0;
                let d1 = fd(|t| prof.p(t), r);
                let d2 = fd(|t| prof.dp(t), r);
                assert!((d1 - prof.dp(r)).abs() < 1e-7, "{} dp at {r}", prof.name());
                assert!((d2 - prof.d2p(r)).abs() < 1e-6, "{} d2p at {r}", prof.name());
            }
        }
    }

    #[test]
    fn hollow_profile_vanishes_at_edge_and_is_flat_inside_bump() {
        let prof = PressureProfile::hollow_current(0.3, 0.7, 1.0, 0.0, 1.0);
        assert_eq!(prof.p(1.0), 0.0);
        assert_eq!(prof.p(0.8), 0.0);
        assert!((prof.p(0.1) - prof.p(0.2)).abs() < 1e-14);
        assert!(prof.p(0.1) > 0.0);
    }

    #[test]
    fn spline_reproduces_cubic() {
        let r: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let f = |x: f64| 1.0 - 0.5 * x * x - 0.5 * x * x * x;
        let p: Vec<f64> = r.iter().map(|&x| f(x)).collect();
        let prof = PressureProfile::table(r, p).unwrap();
        for &x in &[0.13, 0.5, 0.77, 0.99] {
            assert!((prof.p(x) - f(x)).abs() < 1e-4);
            assert!((prof.dp(x) - (-x - 1.5 * x * x)).abs() < 5e-3);
        }
    }
}
