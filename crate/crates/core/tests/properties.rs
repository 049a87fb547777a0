use std::sync::OnceLock;

use proptest::prelude::*;
use zpinch::equilibrium::build_equilibrium;
use zpinch::forms::{Discretization, FormAssembler, ModeForms, ModePair, Viscosity};
use zpinch::profile::PressureProfile;
use zpinch::report::float;
use zpinch::scan::{lower_envelope, ModeRange};

fn assembler() -> &'static FormAssembler {
    static ASM: OnceLock<FormAssembler> = OnceLock::new();
    ASM.get_or_init(|| {
        let eq = build_equilibrium(PressureProfile::parabolic(1.0, 1.0), 2.0, 5.0 / 3.0, 1.0).unwrap();
        let disc = Discretization { n_elements_plasma: 16, n_elements_vacuum: 8, fem_order: 2, grading_ratio: 20.0 };
        FormAssembler::new(&eq, disc, Viscosity { epsilon: 0.1, delta: 0.1 }).unwrap()
    })
}

fn forms(m: i64, k: i64) -> ModeForms {
    assembler().assemble(ModePair::new(m, k)).unwrap()
}

fn vector(f: &ModeForms, seed: &[f64]) -> Vec<f64> {
    (0..f.dim()).map(|i| seed[i % seed.len()] * (1.0 + (i as f64).sin())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_is_affine_in_s(m in -3i64..=3, k in -6i64..=6, seed in prop::collection::vec(-1.0f64..1.0, 7), s in 0.0f64..5.0) {
        let f = forms(m, k);
        let v = vector(&f, &seed);
        let (e0, e1) = (f.energy(&v, 0.0), f.dissipation(&v));
        let scale = f.scale(s) * v.iter().map(|x| x * x).sum::<f64>();
        prop_assert!((f.energy(&v, s) - (e0 + s * e1)).abs() <= 1e-12 * scale.max(1e-300));
    }

    #[test]
    fn mass_and_dissipation_are_positive(m in -3i64..=3, k in -6i64..=6, seed in prop::collection::vec(-1.0f64..1.0, 5)) {
        prop_assume!(seed.iter().any(|&x| x.abs() > 1e-3));
        let f = forms(m, k);
        let v = vector(&f, &seed);
        prop_assert!(f.constraint(&v) > 0.0);
        prop_assert!(f.dissipation(&v) >= -1e-12 * f.k1.norm_inf() * v.iter().map(|x| x * x).sum::<f64>());
    }

    #[test]
    fn reflection_maps_energies(m in -3i64..=3, k in -6i64..=6, seed in prop::collection::vec(-1.0f64..1.0, 6), s in 0.0f64..2.0) {
        let f = forms(m, k);
        let g = forms(-m, -k);
        let v = vector(&f, &seed);
        let w: Vec<f64> = v.iter().zip(f.reflection_signs()).map(|(x, sg)| x * sg).collect();
        let scale = f.scale(s) * v.iter().map(|x| x * x).sum::<f64>();
        prop_assert!((f.energy(&v, s) - g.energy(&w, s)).abs() <= 1e-13 * scale.max(1e-300));
        prop_assert!((f.constraint(&v) - g.constraint(&w)).abs() <= 1e-13 * f.constraint(&v));
    }

    #[test]
    fn lower_envelope_bounds_every_point(points in prop::collection::vec((0.0f64..100.0, -10.0f64..1000.0), 2..40)) {
        prop_assume!(points.iter().any(|p| p.0 != points[0].0));
        let fit = lower_envelope(&points).unwrap();
        for &(w, d) in &points {
            prop_assert!(d >= fit.c * w - fit.offset - 1e-9 * (1.0 + d.abs() + (fit.c * w).abs()));
        }
    }

    #[test]
    fn floats_round_trip(x in any::<f64>()) {
        prop_assume!(x.is_finite());
        prop_assert_eq!(float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn ranges_parse_inclusively(lo in -20i64..20, len in 0i64..10) {
        let r: ModeRange = format!("{lo}:{}", lo + len).parse().unwrap();
        prop_assert_eq!(r.iter().count() as i64, len + 1);
        prop_assert!(r.contains(lo) && r.contains(lo + len) && !r.contains(lo - 1));
    }
}
