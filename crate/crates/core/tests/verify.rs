use herzlab::conv::ConvBackend;
use herzlab::exponent::{ExponentPreset, VariableExponent};
use herzlab::grid::{build_grid, GridFunction, GridSpec, Region};
use herzlab::norms::{herz_norm, HerzParams};
use herzlab::verify::*;
use herzlab::weights::{Weight, WeightPreset};
use herzlab::HerzError;

fn unit_setting(p0: f64) -> Setting {
    Setting::new(ExponentPreset::Const(p0), WeightPreset::Const(1.0))
}

fn sq(size: usize) -> SquareConfig {
    SquareConfig { beta: 1.0, dict_size: size, dict_seed: 5, backend: ConvBackend::Auto }
}

#[test]
fn lemma1_examples() {
    let g = build_grid(GridSpec::new(1, -2, 4, 16)).unwrap();
    let p = VariableExponent::constant(&g, 2.0).unwrap();
    let fit = check_lemma1(&p, &Weight::unit(&g), &g, 400, 1).unwrap();
    assert!((fit.c - 1.0).abs() < 1e-3, "{fit:?}");
    assert_eq!(fit.envelope_violations, 0);

    let w = Weight::power(&g, 0.5).unwrap();
    let c1 = check_lemma1(&p, &w, &g, 400, 1).unwrap().c;
    let c2 = check_lemma1(&p, &w, &g, 800, 1).unwrap().c;
    assert!(c1.is_finite() && c2 >= c1 && c2 / c1 < 1.05, "{c1} {c2}");
}

#[test]
fn lemma2_delta_is_one_over_p() {
    let g = build_grid(GridSpec::new(1, -2, 4, 16)).unwrap();
    for p0 in [2.0, 3.0, 4.0] {
        let p = VariableExponent::constant(&g, p0).unwrap();
        let fit = check_lemma2(&p, &Weight::unit(&g), &g, 500, 2).unwrap();
        assert!((fit.delta - 1.0 / p0).abs() < 0.05, "{p0}: {fit:?}");
        assert_eq!(fit.envelope_violations, 0);
    }
}

#[test]
fn norm_growth_examples() {
    let g = build_grid(GridSpec::new(1, -4, 6, 64)).unwrap();
    let p = VariableExponent::constant(&g, 2.0).unwrap();
    let unit = estimate_norm_growth_delta(&p, &Weight::unit(&g), &g).unwrap();
    assert!((unit.delta - 0.5).abs() < 0.02);
    let lin = estimate_norm_growth_delta(&p, &Weight::power(&g, 1.0).unwrap(), &g).unwrap();
    assert!((lin.delta - 1.0).abs() < 0.05, "{lin:?}");

    let short = build_grid(GridSpec::new(1, 0, 3, 16)).unwrap();
    let p = VariableExponent::constant(&short, 2.0).unwrap();
    let err = estimate_norm_growth_delta(&p, &Weight::unit(&short), &short).unwrap_err();
    assert!(err.to_string().contains("insufficient shells"));
}

#[test]
fn window_examples() {
    let g = build_grid(GridSpec::new(1, -2, 3, 16)).unwrap();
    let params = |alpha: f64, r: f64| {
        HerzParams::new(alpha, 1.0, VariableExponent::constant(&g, 2.0).unwrap(), Weight::unit(&g), r, 0.5).unwrap()
    };
    assert!(validate_window(&params(0.0, 0.75), 1).accept);
    let d = validate_window(&params(0.3, 0.75), 1);
    assert!(!d.accept && d.alpha_upper_margin < 0.0);
    let d = validate_window(&params(0.0, 0.4), 1);
    assert!(!d.accept && d.r_lower_margin < 0.0);
}

#[test]
fn herz_ratios_are_scale_invariant() {
    let base = GridSpec::new(1, -2, 3, 16);
    let suite = build_suite_from(base, &[SuiteFamily::Shell, SuiteFamily::Lacunary], 6, 8);
    let scale = |c: f64| -> Vec<SuiteEntry> {
        suite
            .iter()
            .map(|e| {
                let terms = match &e.f {
                    TestFunction::Lacunary { terms } => terms.iter().map(|&(k, a)| (k, c * a)).collect(),
                    TestFunction::ShellIndicator { k } => vec![(*k, c)],
                    other => unreachable!("{other:?}"),
                };
                SuiteEntry { id: e.id.clone(), f: TestFunction::Lacunary { terms } }
            })
            .collect()
    };
    let hs = HerzSetting { alpha: 0.0, q: 1.0, r: 0.75, delta: 0.5, setting: unit_setting(2.0) };
    let a = herz_boundedness_ratio(&hs, &sq(4), &scale(1.0), base, 2, true, false).unwrap();
    let b = herz_boundedness_ratio(&hs, &sq(4), &scale(3.7), base, 2, true, false).unwrap();
    assert_eq!(a.rows.len(), 12);
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert!((x.ratio - y.ratio).abs() <= 1e-10 * x.ratio, "{} {} {}", x.function_id, x.ratio, y.ratio);
    }
}

#[test]
fn out_of_window_needs_probe_mode() {
    let base = GridSpec::new(1, -2, 3, 16);
    let suite = build_suite(base, 4, 8);
    let hs = HerzSetting { alpha: 0.25 + 0.2, q: 1.0, r: 0.75, delta: 0.5, setting: unit_setting(2.0) };
    let err = herz_boundedness_ratio(&hs, &sq(4), &suite, base, 2, true, false).unwrap_err();
    assert!(matches!(err, HerzError::WindowRejected(_)));
    let probe = herz_boundedness_ratio(&hs, &sq(4), &suite, base, 2, true, true).unwrap();
    assert!(probe.probe && probe.passes());
    assert_eq!(probe.max_by_resolution.len(), 2);
}

#[test]
fn single_shell_decomposition_collapses() {
    let g = build_grid(GridSpec::new(1, -2, 4, 16)).unwrap();
    let dict = sq(4).dictionary(1).unwrap();
    for q in [0.5, 2.0] {
        let params =
            HerzParams::new(0.1, q, VariableExponent::constant(&g, 2.0).unwrap(), Weight::unit(&g), 0.75, 0.5).unwrap();
        let f = GridFunction::indicator(&g, &Region::Shell(1)).unwrap();
        let d = decomposition_diagnostic(&f, &params, &dict, ConvBackend::Auto, &g, true).unwrap();
        // Each shell k of S f lands in exactly one of the three sums.
        let recombined = (d.t.iter().map(|t| t.powf(q)).sum::<f64>()).powf(1.0 / q);
        assert!((recombined - d.herz_sf).abs() <= 1e-9 * d.herz_sf, "{q}: {recombined} vs {}", d.herz_sf);
        assert_eq!(d.branch, QBranch::of(q));
        assert!(d.sanity_holds());
        assert!((d.herz_f - herz_norm(&f, &params, true, &g).unwrap().value).abs() == 0.0);
    }
    assert_eq!(QBranch::of(0.5), QBranch::QuasiTriangle);
    assert_eq!(QBranch::of(2.0), QBranch::HolderSplit);
}

#[test]
fn maximal_lp_ratio_is_refinement_stable() {
    let base = GridSpec::new(1, -2, 4, 16);
    let suite = build_suite(base, 20, 11);
    let rep = lp_boundedness_ratio(&Operator::Maximal, &unit_setting(2.0), &suite, base, 2).unwrap();
    assert!(rep.max_ratio <= 4.0 && rep.passes(), "{} {}", rep.max_ratio, rep.refinement_growth);
    assert!(rep.rows.iter().all(|r| r.ratio > 0.0));
}

#[test]
fn square_function_outputs_grow_with_the_dictionary() {
    let base = GridSpec::new(1, -2, 3, 16);
    let suite = build_suite(base, 8, 4);
    let reports: Vec<RatioReport> = [4, 8, 16]
        .iter()
        .map(|&m| lp_boundedness_ratio(&Operator::SBeta(sq(m)), &unit_setting(2.0), &suite, base, 2).unwrap())
        .collect();
    for w in reports.windows(2) {
        for (a, b) in w[0].rows.iter().zip(&w[1].rows) {
            assert!(b.output_norm >= a.output_norm, "{}", a.function_id);
        }
        assert!(w[1].passes());
    }
}

#[test]
fn chain_on_a_small_zoo_is_monotone() {
    let zoo = vec![WeightPreset::Const(1.0), WeightPreset::Power(-0.5), WeightPreset::Power(0.5)];
    let table = check_inclusion_chain(
        &zoo,
        &ExponentPreset::Ramp(2.0, 3.0),
        &ExponentPreset::Ramp(3.0, 5.0),
        ProbeConfig::new(GridSpec::new(1, -1, 3, 8), 4),
    )
    .unwrap();
    assert_eq!(table.rows[0].verdicts(), vec![true; 5]);
    assert_eq!(table.rows[1].verdicts(), vec![true; 5]);
    assert_eq!(table.rows[2].verdicts(), vec![false, true, true, true, true]);
    assert!(table.passes());
    let err = check_inclusion_chain(
        &zoo,
        &ExponentPreset::Const(3.0),
        &ExponentPreset::Const(2.0),
        ProbeConfig::new(GridSpec::new(1, -1, 3, 8), 4),
    );
    assert!(err.is_err());
}

#[test]
fn far_shell_bound_is_refinement_stable() {
    let s = unit_setting(2.0);
    let c1 = far_shell_constant(&s, &sq(4), GridSpec::new(1, -2, 4, 16)).unwrap();
    let c2 = far_shell_constant(&s, &sq(4), GridSpec::new(1, -2, 4, 32)).unwrap();
    assert!(c1.is_finite() && c1 > 0.0);
    assert!((c2 / c1 - 1.0).abs() < 0.1, "{c1} {c2}");
}
