//! Envelope fits for the ball lemmas and the norm-growth hypothesis, the admissibility window,
//! and the Rubio de Francia property checks.

use serde::Serialize;

use crate::error::{HerzError, Result};
use crate::exponent::VariableExponent;
use crate::fit::{envelope_fit, fixed_slope_fit, FitReport};
use crate::grid::{measure, Grid, GridFunction, Point, Region};
use crate::norms::{norm_on, HerzParams};
use crate::sqfn::{maximal, rubio_francia, RubioConfig};
use crate::weights::{sample_ball_pairs, PairSampling, Weight};

/// `(|ball|, ||chi_ball||_{L^p(.)(w)})` for an open ball.
fn ball_figures(ball: (Point, f64), p: &VariableExponent, w: &Weight, grid: &Grid) -> (f64, f64) {
    let nodes = grid.ball_nodes(ball.0, ball.1, true);
    let ones = vec![1.0; grid.len()];
    let norm = norm_on(&ones, p.values(), w.values(), &nodes, grid.cell());
    (nodes.len() as f64 * grid.cell(), norm)
}

/// `(ln |E|/|B|, ln ||chi_E|| / ||chi_B||)` over seeded pairs: the cloud behind both ball lemmas.
pub fn ball_pair_points(p: &VariableExponent, w: &Weight, grid: &Grid, trials: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    grid.check_same(p.spec())?;
    grid.check_same(w.spec())?;
    Ok(sample_ball_pairs(grid, PairSampling::Random, trials, seed)
        .into_iter()
        .filter_map(|pair| {
            let (mb, nb) = ball_figures(pair.outer, p, w, grid);
            let (me, ne) = ball_figures(pair.inner, p, w, grid);
            (me > 0.0 && mb > 0.0).then(|| ((me / mb).ln(), (ne / nb).ln()))
        })
        .collect())
}

/// Smallest `C` with `|E|/|B| <= C ||chi_E|| / ||chi_B||` over seeded pairs `E` inside `B`.
/// The report's `delta` is `1`: the bound is linear in the measure ratio.
pub fn check_lemma1(p: &VariableExponent, w: &Weight, grid: &Grid, trials: usize, seed: u64) -> Result<FitReport> {
    let quotients: Vec<(f64, f64)> =
        ball_pair_points(p, w, grid, trials, seed)?.into_iter().map(|(x, y)| (x, x - y)).collect();
    let fit = fixed_slope_fit(&quotients, 0.0);
    Ok(FitReport { delta: 1.0, ..fit })
}

/// Upper envelope `||chi_E|| / ||chi_B|| <= C (|E|/|B|)^delta` over seeded pairs.
pub fn check_lemma2(p: &VariableExponent, w: &Weight, grid: &Grid, trials: usize, seed: u64) -> Result<FitReport> {
    Ok(envelope_fit(&ball_pair_points(p, w, grid, trials, seed)?))
}

/// Minimum number of shells for the norm-growth fit.
pub const NORM_GROWTH_MIN_SHELLS: usize = 6;

/// Fits `||chi_(B_k)|| / ||chi_(B_l)|| <= C 2^(delta n (k - l))` over all `k <= l` in the grid's
/// shell range. `delta` is reported raw, even outside `(0, 1)`.
pub fn estimate_norm_growth_delta(p: &VariableExponent, w: &Weight, grid: &Grid) -> Result<FitReport> {
    Ok(envelope_fit(&norm_growth_points(p, w, grid)?))
}

/// `(n (k - l) ln 2, ln ||chi_(B_k)|| / ||chi_(B_l)||)` for all `k <= l`.
pub fn norm_growth_points(p: &VariableExponent, w: &Weight, grid: &Grid) -> Result<Vec<(f64, f64)>> {
    grid.check_same(p.spec())?;
    grid.check_same(w.spec())?;
    if grid.shell_count() < NORM_GROWTH_MIN_SHELLS {
        return Err(HerzError::InsufficientShells { need: NORM_GROWTH_MIN_SHELLS, have: grid.shell_count() });
    }
    let ones = vec![1.0; grid.len()];
    let norms: Vec<(i32, f64)> = grid
        .shell_range()
        .map(|k| {
            let nodes = Region::dyadic_ball(k).nodes(grid)?;
            Ok((k, norm_on(&ones, p.values(), w.values(), &nodes, grid.cell())))
        })
        .collect::<Result<_>>()?;
    let n = grid.dim() as f64;
    let mut points = Vec::new();
    for &(k, nk) in &norms {
        for &(l, nl) in &norms {
            if k <= l {
                points.push((n * (k - l) as f64 * std::f64::consts::LN_2, (nk / nl).ln()));
            }
        }
    }
    Ok(points)
}

/// Outcome of the main theorem's admissibility test, with each margin (positive = satisfied).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowDecision {
    pub accept: bool,
    /// `alpha + n delta`
    pub alpha_lower_margin: f64,
    /// `n (1 - r) - alpha`
    pub alpha_upper_margin: f64,
    /// `r - 1/p_-`
    pub r_lower_margin: f64,
    /// `1 - r`
    pub r_upper_margin: f64,
}

impl WindowDecision {
    pub fn reasons(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.alpha_lower_margin <= 0.0 {
            out.push(format!("alpha <= -n delta (margin {})", self.alpha_lower_margin));
        }
        if self.alpha_upper_margin <= 0.0 {
            out.push(format!("alpha >= n(1-r) (margin {})", self.alpha_upper_margin));
        }
        if self.r_lower_margin <= 0.0 {
            out.push(format!("r <= 1/p_- (margin {})", self.r_lower_margin));
        }
        if self.r_upper_margin <= 0.0 {
            out.push(format!("r >= 1 (margin {})", self.r_upper_margin));
        }
        out
    }
}

/// Accepts iff `-n delta < alpha < n (1 - r)` and `1/p_- < r < 1`.
pub fn validate_window(params: &HerzParams, n: usize) -> WindowDecision {
    window(params.alpha, params.r, params.delta, params.p.p_minus(), n)
}

pub(crate) fn window(alpha: f64, r: f64, delta: f64, p_minus: f64, n: usize) -> WindowDecision {
    let n = n as f64;
    let d = WindowDecision {
        accept: false,
        alpha_lower_margin: alpha + n * delta,
        alpha_upper_margin: n * (1.0 - r) - alpha,
        r_lower_margin: r - 1.0 / p_minus,
        r_upper_margin: 1.0 - r,
    };
    let accept = d.alpha_lower_margin > 0.0 && d.alpha_upper_margin > 0.0 && d.r_lower_margin > 0.0 && d.r_upper_margin > 0.0;
    WindowDecision { accept, ..d }
}

/// Pointwise audit of the Rubio de Francia majorant.
#[derive(Debug, Clone, PartialEq)]
pub struct RubioCheck {
    pub tau: f64,
    /// Nodes with `|g| > Rg`.
    pub lower_violations: usize,
    /// Nodes with `M(Rg) > 2A Rg (1 + tau)` beyond float slack.
    pub upper_violations: usize,
    /// `max M(Rg) / (2A Rg)`.
    pub worst_ratio: f64,
}

/// Checks `|g| <= Rg` and `M(Rg) <= 2A Rg (1 + tau)` at every node. Comparisons carry a slack of
/// `1e-10 ||Rg||_inf` for rounding in the window sums.
pub fn check_rubio(g: &GridFunction, cfg: RubioConfig, radii: &[f64], grid: &Grid) -> Result<RubioCheck> {
    let out = rubio_francia(g, cfg, radii, grid)?;
    let rg = out.rg.samples();
    let mrg = maximal(&out.rg, radii, grid)?;
    let slack = 1e-10 * out.rg.max_abs();
    let two_a = 2.0 * cfg.a;
    let lower_violations = g.samples().iter().zip(rg).filter(|(gv, r)| gv.abs() > **r + slack).count();
    let mut upper_violations = 0;
    let mut worst_ratio: f64 = 0.0;
    for (m, r) in mrg.samples().iter().zip(rg) {
        if *m > two_a * r * (1.0 + out.tau) + slack {
            upper_violations += 1;
        }
        if *r > 0.0 {
            worst_ratio = worst_ratio.max(m / (two_a * r));
        }
    }
    Ok(RubioCheck { tau: out.tau, lower_violations, upper_violations, worst_ratio })
}

/// `max_g max_(1 <= k <= k_max) (||M^k g|| / ||g||)^(1/k)` in `L^p(.)(w)`: an empirical stand-in
/// for the operator norm of `M`, floored at 1.
pub fn maximal_norm_surrogate(
    suite: &[GridFunction],
    p: &VariableExponent,
    w: &Weight,
    radii: &[f64],
    grid: &Grid,
    k_max: usize,
) -> Result<f64> {
    let mut a: f64 = 1.0;
    for g in suite {
        let base = crate::norms::weighted_norm(g, p, w)?;
        if base == 0.0 {
            continue;
        }
        let mut it = g.abs();
        for k in 1..=k_max {
            it = maximal(&it, radii, grid)?;
            let ratio = crate::norms::weighted_norm(&it, p, w)? / base;
            a = a.max(ratio.powf(1.0 / k as f64));
        }
    }
    Ok(a)
}

/// `|B_k|` for the grid's closed dyadic balls.
pub(crate) fn dyadic_ball_measure(k: i32, grid: &Grid) -> Result<f64> {
    measure(&Region::dyadic_ball(k), grid)
}
