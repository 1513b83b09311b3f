mod common;

use herzlab::exponent::{conjugate, ExponentPreset, VariableExponent};
use herzlab::grid::{build_grid, Grid, GridFunction, GridSpec, Region};
use herzlab::norms::{
    associate_norm, herz_norm, luxemburg_norm, modular, pairing, weighted_norm, HerzParams, ModularQuery,
};
use herzlab::weights::Weight;
use proptest::prelude::*;

fn grid() -> Grid {
    build_grid(GridSpec::new(1, -2, 3, 32)).unwrap()
}

fn field(g: &Grid, a: f64, b: f64) -> GridFunction {
    GridFunction::from_fn(g, |p| (a * p[0]).sin() * (-(p[0] - b).powi(2) / 4.0).exp()).unwrap()
}

#[test]
fn variable_exponent_norm_matches_bisection_oracle() {
    let g = grid();
    for preset in ["ramp:1.5,4", "rational:2,1"] {
        let p = VariableExponent::from_preset(&g, &preset.parse().unwrap()).unwrap();
        let w = Weight::power(&g, -0.3).unwrap();
        let f = field(&g, 1.1, 0.4);
        let fast = weighted_norm(&f, &p, &w).unwrap();
        let slow = common::brute_luxemburg(f.samples(), p.values(), w.values(), g.cell());
        assert!(common::rel(fast, slow) < 1e-9, "{preset}: {fast} vs {slow}");
    }
}

#[test]
fn frozen_norm() {
    let g = grid();
    let p = VariableExponent::from_preset(&g, &ExponentPreset::Ramp(2.0, 3.0)).unwrap();
    let w = Weight::power(&g, 0.25).unwrap();
    let f = field(&g, 0.7, -0.5);
    let oracle = common::brute_luxemburg(f.samples(), p.values(), w.values(), g.cell());
    assert!(common::rel(oracle, FROZEN_RAMP_NORM) < 1e-12, "{oracle:.17e}");
    assert!(common::rel(weighted_norm(&f, &p, &w).unwrap(), FROZEN_RAMP_NORM) < 1e-9);
}

// Bisection oracle, ramp 2..3, w = |x|^(1/4), 1D grid (-2, 3, 32).
const FROZEN_RAMP_NORM: f64 = 7.99569902014974687e-1;

#[test]
fn constant_exponent_norm_has_closed_form() {
    let g = grid();
    for p0 in [1.5, 2.0, 3.0, 4.0] {
        let p = VariableExponent::constant(&g, p0).unwrap();
        let w = Weight::power(&g, 0.5).unwrap();
        let f = field(&g, 2.0, 1.0);
        let closed = (f.samples().iter().zip(w.values()).map(|(v, wt)| v.abs().powf(p0) * wt).sum::<f64>() * g.cell())
            .powf(1.0 / p0);
        assert!(common::rel(weighted_norm(&f, &p, &w).unwrap(), closed) < 1e-9);
    }
}

#[test]
fn herz_norm_of_one_shell_is_scaled_shell_norm() {
    let g = grid();
    let p = VariableExponent::constant(&g, 2.0).unwrap();
    let w = Weight::unit(&g);
    let params = HerzParams::new(0.5, 1.0, p.clone(), w.clone(), 0.75, 0.5).unwrap();
    let f = GridFunction::indicator(&g, &Region::Shell(2)).unwrap();
    let h = herz_norm(&f, &params, true, &g).unwrap();
    let expected = 2f64.powf(0.5 * 2.0) * weighted_norm(&f, &p, &w).unwrap();
    assert!(common::rel(h.value, expected) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn unit_sphere_modular(a in 0.2f64..3.0, b in -2.0f64..2.0, p_lo in 1.2f64..3.0, span in 0.0f64..2.0, wexp in -0.8f64..1.0) {
        let g = grid();
        let p = VariableExponent::from_preset(&g, &ExponentPreset::Ramp(p_lo, p_lo + span)).unwrap();
        let w = Weight::power(&g, wexp).unwrap();
        let f = field(&g, a, b);
        let q = ModularQuery::weighted(&f, &p, &w);
        let n = luxemburg_norm(&q).unwrap();
        let rho = modular(&q, n).unwrap();
        prop_assert!(rho <= 1.0 && rho >= 1.0 - 1e-8, "rho = {rho}");
    }

    #[test]
    fn norm_is_homogeneous_and_monotone(c in 0.01f64..100.0, a in 0.2f64..3.0) {
        let g = grid();
        let p = VariableExponent::from_preset(&g, &ExponentPreset::Ramp(1.5, 3.5)).unwrap();
        let w = Weight::unit(&g);
        let f = field(&g, a, 0.0);
        let base = weighted_norm(&f, &p, &w).unwrap();
        prop_assert!(common::rel(weighted_norm(&f.scaled(c), &p, &w).unwrap(), c * base) < 1e-9);
        let bigger = f.map(|v| v.abs() + 0.01);
        prop_assert!(weighted_norm(&bigger, &p, &w).unwrap() >= base);
    }

    #[test]
    fn generalized_holder(a in 0.2f64..3.0, b in 0.2f64..3.0, wexp in -0.5f64..0.5) {
        let g = grid();
        let p = VariableExponent::from_preset(&g, &ExponentPreset::Rational(2.0, 1.0)).unwrap();
        let w = Weight::power(&g, wexp).unwrap();
        let (f, h) = (field(&g, a, 0.3), field(&g, b, -0.6));
        let lhs = pairing(&f.abs(), &h.abs()).unwrap();
        prop_assert!(lhs <= 2.0 * weighted_norm(&f, &p, &w).unwrap() * associate_norm(&h, &p, &w).unwrap());
    }

    #[test]
    fn conjugate_is_an_involution(p_lo in 1.1f64..4.0, span in 0.0f64..3.0) {
        let g = grid();
        let p = VariableExponent::from_preset(&g, &ExponentPreset::Ramp(p_lo, p_lo + span)).unwrap();
        let back = conjugate(&conjugate(&p));
        for (x, y) in p.values().iter().zip(back.values()) {
            prop_assert!((x - y).abs() < 1e-12 * x);
        }
    }
}
