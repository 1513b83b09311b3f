mod common;

use herzlab::exponent::VariableExponent;
use herzlab::grid::{build_grid, GridSpec, Region};
use herzlab::weights::{
    a1_constant, a1_measure_comparison, ap_constant, apvar_constant, atilde_constant, probe_divergence,
    weighted_measure, BallFamily, PairSampling, Weight, DEFAULT_STRIDE,
};
use proptest::prelude::*;

fn balls(f: &BallFamily) -> Vec<([f64; 2], f64)> {
    f.centers().iter().flat_map(|&c| f.radii().iter().map(move |&r| (c, r))).collect()
}

#[test]
fn class_constants_match_brute_force_over_the_same_balls() {
    for spec in [GridSpec::new(1, -1, 3, 16), GridSpec::new(2, -1, 1, 8)] {
        let g = build_grid(spec).unwrap();
        let fam = BallFamily::ladder(&g, 4);
        for a in [-0.5, 0.7] {
            let w = Weight::power(&g, a).unwrap();
            let fast = a1_constant(&w, &fam, &g).unwrap();
            assert!(common::rel(fast, common::brute_a1(w.values(), &balls(&fam), &g)) < 1e-12, "{spec:?} {a}");
            let fast = ap_constant(&w, 2.5, &fam, &g).unwrap();
            assert!(common::rel(fast, common::brute_ap(w.values(), 2.5, &balls(&fam), &g)) < 1e-12);
        }
    }
}

#[test]
fn unit_weight_is_in_every_class() {
    let g = build_grid(GridSpec::new(1, -1, 3, 16)).unwrap();
    let fam = BallFamily::ladder(&g, DEFAULT_STRIDE);
    let w = Weight::unit(&g);
    let p = VariableExponent::constant(&g, 3.0).unwrap();
    assert_eq!(a1_constant(&w, &fam, &g).unwrap(), 1.0);
    assert!((ap_constant(&w, 3.0, &fam, &g).unwrap() - 1.0).abs() < 1e-12);
    assert!((apvar_constant(&w, &p, &fam, &g).unwrap() - 1.0).abs() < 1e-8);
    assert!((atilde_constant(&w, &p, &fam, &g).unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn linear_weight_measure_is_exact() {
    // w(B_k) = 4^k for w = |x| in 1D; midpoints integrate a linear function exactly per cell.
    let g = build_grid(GridSpec::new(1, -2, 4, 16)).unwrap();
    let w = Weight::power(&g, 1.0).unwrap();
    for k in g.shell_range() {
        let m = weighted_measure(&w, &Region::dyadic_ball(k), &g).unwrap();
        assert!(common::rel(m, 4f64.powi(k)) < 1e-13, "{k}: {m}");
    }
}

#[test]
fn singular_weight_measure_converges_to_closed_form() {
    // w(B_0) = 4 for w = |x|^(-1/2); the midpoint error decays like h^(1/2).
    let errors: Vec<f64> = [16u32, 64, 256]
        .iter()
        .map(|&ppu| {
            let g = build_grid(GridSpec::new(1, -2, 1, ppu)).unwrap();
            let w = Weight::power(&g, -0.5).unwrap();
            (weighted_measure(&w, &Region::dyadic_ball(0), &g).unwrap() - 4.0).abs()
        })
        .collect();
    assert!(errors[1] < 0.6 * errors[0] && errors[2] < 0.6 * errors[1], "{errors:?}");
}

#[test]
fn divergence_probe_separates_power_weights() {
    let base = GridSpec::new(1, -1, 3, 8);
    let probe = |a: f64| {
        probe_divergence(base, 4, DEFAULT_STRIDE, |g, fam| a1_constant(&Weight::power(g, a)?, fam, g)).unwrap()
    };
    let inside = probe(-0.5);
    assert!(inside.finite(), "{:?}", inside.growth);
    let outside = probe(0.5);
    assert!(outside.divergent);
    // avg / min over the smallest origin ball grows like 2^a per doubling.
    for g in &outside.growth {
        assert!((g - 2f64.sqrt()).abs() < 0.01, "{g}");
    }
}

#[test]
fn unit_weight_measure_comparison_is_exact() {
    let g = build_grid(GridSpec::new(1, -2, 4, 16)).unwrap();
    let mc = a1_measure_comparison(&Weight::unit(&g), &g, PairSampling::Concentric, 200, 5).unwrap();
    assert_eq!(mc.fit.delta, 1.0);
    assert_eq!(mc.fit.c, 1.0);
    assert_eq!(mc.fit.envelope_violations, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constants_are_at_least_one(a in -0.9f64..2.0, p0 in 1.2f64..4.0) {
        let g = build_grid(GridSpec::new(1, -1, 2, 16)).unwrap();
        let fam = BallFamily::ladder(&g, DEFAULT_STRIDE);
        let w = Weight::power(&g, a).unwrap();
        prop_assert!(a1_constant(&w, &fam, &g).unwrap() >= 1.0 - 1e-12);
        prop_assert!(ap_constant(&w, p0, &fam, &g).unwrap() >= 1.0 - 1e-12);
        prop_assert!(ap_constant(&w, p0, &fam, &g).unwrap() <= a1_constant(&w, &fam, &g).unwrap() * (1.0 + 1e-12));
    }
}
