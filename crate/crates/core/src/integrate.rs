//! One-dimensional quadrature helpers: adaptive Gauss–Kronrod (7/15) for the
//! equilibrium field integral, and Gauss–Legendre rules mapped to elements.

use gauss_quad::legendre::GaussLegendre;
use std::num::NonZeroUsize;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the 7-point rule living on XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 48;

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (k, err) = kronrod15(f, a, b);
    // the floor keeps roundoff in the error estimate from forcing splits
    if err <= tol.max(64.0 * f64::EPSILON * k.abs()) || depth >= MAX_DEPTH || (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
        return k;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth + 1) + adapt(f, m, b, 0.5 * tol, depth + 1)
}

/// Adaptive Gauss–Kronrod integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    adapt(&f, a, b, tol, 0)
}

/// Gauss–Legendre nodes and weights on the reference interval `[-1, 1]`,
/// sorted by node.
pub fn gauss_legendre(points: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(points.max(1)).expect("nonzero");
    let mut pairs: Vec<(f64, f64)> = GaussLegendre::new(n).as_node_weight_pairs().to_vec();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_polynomials_are_exact() {
        let v = gauss_kronrod(|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0, 1e-14);
        assert!((v - (256.0 / 8.0 - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn kronrod_adapts_on_sharp_integrand() {
        let v = gauss_kronrod(|x: f64| x.sqrt(), 0.0, 1.0, 1e-12);
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn legendre_weights_sum_to_two() {
        for n in 1..8 {
            let s: f64 = gauss_legendre(n).iter().map(|p| p.1).sum();
            assert!((s - 2.0).abs() < 1e-14);
        }
    }
}
