mod common;

use herzlab::conv::ConvBackend;
use herzlab::grid::{build_grid, Grid, GridFunction, GridSpec};
use herzlab::sqfn::{a_beta, build_dictionary, maximal, rubio_francia, s_beta, ConeQuadrature, RubioConfig};
use herzlab::verify::check_rubio;
use herzlab::weights::radius_ladder;

fn bump(g: &Grid, c: f64, r: f64) -> GridFunction {
    GridFunction::from_fn(g, |p| {
        let d2 = ((p[0] - c).powi(2) + p[1] * p[1]) / (r * r);
        if d2 < 1.0 {
            (1.0 - d2).powi(2)
        } else {
            0.0
        }
    })
    .unwrap()
}

#[test]
fn maximal_matches_brute_force() {
    for spec in [GridSpec::new(1, -1, 2, 16), GridSpec::new(2, -1, 1, 8)] {
        let g = build_grid(spec).unwrap();
        let f = GridFunction::from_fn(&g, |p| (p[0] * 2.1).sin() + 0.3 * (p[1] * 0.7).cos()).unwrap();
        let radii = radius_ladder(&g);
        let fast = maximal(&f, &radii, &g).unwrap();
        let slow = common::brute_maximal(f.samples(), &radii, &g);
        for (a, b) in fast.samples().iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{spec:?}: {a} vs {b}");
        }
    }
}

#[test]
fn a_beta_matches_brute_force() {
    let g = build_grid(GridSpec::new(1, -1, 1, 16)).unwrap();
    let dict = build_dictionary(1.0, 6, 2, 1).unwrap();
    let f = bump(&g, 0.2, 0.7);
    for &(y, t) in &[(10usize, 0.125), (31, 0.5), (40, 1.7), (63, 4.0)] {
        let fast = a_beta(&f, y, t, &dict, &g).unwrap();
        let slow = common::brute_a_beta(f.samples(), y, t, &dict, &g);
        assert!((fast - slow).abs() <= 1e-13 * slow.max(1e-300), "{y} {t}: {fast} vs {slow}");
    }
}

#[test]
fn square_function_matches_nested_loop_oracle() {
    let cases = [(GridSpec::new(1, -1, 1, 16), 6usize), (GridSpec::new(2, -1, 0, 8), 4)];
    for (spec, size) in cases {
        let g = build_grid(spec).unwrap();
        let dict = build_dictionary(1.0, size, 9, spec.dim).unwrap();
        let cone = ConeQuadrature::new(&g);
        let f = bump(&g, 0.1, 0.6);
        let xs: Vec<usize> = [0, g.len() / 3, g.len() / 2, g.len() - 1].to_vec();
        let slow = common::brute_s_beta(f.samples(), &xs, cone.levels(), &dict, &g);
        for backend in [ConvBackend::Direct, ConvBackend::Fft] {
            let fast = s_beta(&f, &dict, &cone, &g, backend).unwrap();
            for (&x, s) in xs.iter().zip(&slow) {
                assert!(common::rel(fast.samples()[x], *s) < 1e-10, "{spec:?} {backend:?} node {x}");
            }
        }
    }
}

#[test]
fn frozen_square_function_value() {
    let g = build_grid(GridSpec::new(1, -1, 1, 16)).unwrap();
    let dict = build_dictionary(1.0, 6, 9, 1).unwrap();
    let cone = ConeQuadrature::new(&g);
    let f = bump(&g, 0.1, 0.6);
    let x = g.len() / 2;
    let oracle = common::brute_s_beta(f.samples(), &[x], cone.levels(), &dict, &g)[0];
    assert!(common::rel(oracle, FROZEN_S_CENTER) < 1e-12, "{oracle:.17e}");
    let fast = s_beta(&f, &dict, &cone, &g, ConvBackend::Auto).unwrap();
    assert!(common::rel(fast.samples()[x], FROZEN_S_CENTER) < 1e-10);
}

// Nested-loop oracle, 1D grid (-1, 1, 16), dictionary (beta 1, 6 kernels, seed 9).
const FROZEN_S_CENTER: f64 = 1.22896927508073475e-1;

#[test]
fn homogeneity_is_exact_for_dyadic_factors() {
    let g = build_grid(GridSpec::new(1, -1, 2, 16)).unwrap();
    let dict = build_dictionary(1.0, 4, 1, 1).unwrap();
    let cone = ConeQuadrature::new(&g);
    let f = bump(&g, -0.4, 1.1);
    let base = s_beta(&f, &dict, &cone, &g, ConvBackend::Direct).unwrap();
    for c in [0.25, 8.0, -2.0] {
        let scaled = s_beta(&f.scaled(c), &dict, &cone, &g, ConvBackend::Direct).unwrap();
        for (a, b) in scaled.samples().iter().zip(base.samples()) {
            assert_eq!(*a, c.abs() * b);
        }
    }
    let fft = s_beta(&f, &dict, &cone, &g, ConvBackend::Fft).unwrap();
    let scaled = s_beta(&f.scaled(3.0), &dict, &cone, &g, ConvBackend::Fft).unwrap();
    for (a, b) in scaled.samples().iter().zip(fft.samples()) {
        assert!((a - 3.0 * b).abs() <= 1e-12 * (3.0 * b).max(1e-300));
    }
}

#[test]
fn translation_equivariance_away_from_the_boundary() {
    let g = build_grid(GridSpec::new(1, -1, 3, 16)).unwrap();
    let dict = build_dictionary(1.0, 4, 3, 1).unwrap();
    let cone = ConeQuadrature::with_range(&g, 2.0 * g.spacing(), 0.5).unwrap();
    let shift = 13usize;
    let f = bump(&g, -1.0, 0.8);
    let moved = GridFunction::from_samples(
        &g,
        (0..g.len()).map(|i| if i >= shift { f.samples()[i - shift] } else { 0.0 }).collect(),
    )
    .unwrap();
    let a = s_beta(&f, &dict, &cone, &g, ConvBackend::Direct).unwrap();
    let b = s_beta(&moved, &dict, &cone, &g, ConvBackend::Direct).unwrap();
    let margin = (2.0 * cone.t_max() / g.spacing()).ceil() as usize + 1;
    let mut checked = 0;
    for i in margin..g.len() - margin - shift {
        assert_eq!(a.samples()[i], b.samples()[i + shift], "node {i}");
        checked += 1;
    }
    assert!(checked > g.len() / 2);
}

#[test]
fn larger_dictionaries_never_decrease_the_square_function() {
    let g = build_grid(GridSpec::new(1, -1, 2, 16)).unwrap();
    let cone = ConeQuadrature::new(&g);
    let f = GridFunction::from_fn(&g, |p| (3.0 * p[0]).sin() * (-p[0] * p[0]).exp()).unwrap();
    let full = build_dictionary(0.5, 16, 21, 1).unwrap();
    for backend in [ConvBackend::Direct, ConvBackend::Fft] {
        let outs: Vec<GridFunction> =
            [4, 8, 16].iter().map(|&m| s_beta(&f, &full.truncated(m), &cone, &g, backend).unwrap()).collect();
        for w in outs.windows(2) {
            for (small, big) in w[0].samples().iter().zip(w[1].samples()) {
                assert!(big >= small, "{backend:?}: {big} < {small}");
            }
        }
    }
}

#[test]
fn rubio_majorant_on_a_bump() {
    let g = build_grid(GridSpec::new(1, -1, 2, 16)).unwrap();
    let radii = radius_ladder(&g);
    let f = bump(&g, 0.5, 0.5);
    let cfg = RubioConfig::new(1.5, 20).unwrap();
    let check = check_rubio(&f, cfg, &radii, &g).unwrap();
    assert_eq!(check.lower_violations, 0);
    assert_eq!(check.upper_violations, 0);
    let out = rubio_francia(&f, cfg, &radii, &g).unwrap();
    assert!(out.tau <= out.tail_bound * out.next_iterate_sup / out.rg.samples().iter().cloned().fold(f64::INFINITY, f64::min) * (1.0 + 1e-12));
}
