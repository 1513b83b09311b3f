//! One-sided envelope fits `y <= c + delta * x` in log coordinates.

use serde::Serialize;

const ENVELOPE_TOL: f64 = 1e-12;

/// Result of an upper-envelope fit `value <= C * ratio^delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitReport {
    #[serde(rename = "C")]
    pub c: f64,
    pub delta: f64,
    /// Mean gap between the envelope and the samples in log coordinates.
    pub residual: f64,
    pub sample_count: usize,
    pub envelope_violations: usize,
}

impl FitReport {
    pub fn passes(&self) -> bool {
        self.envelope_violations == 0 && self.residual.is_finite()
    }
}

/// Fits `y <= ln C + delta x` over points with `x <= 0` (`x` a log measure ratio).
///
/// The intercept is first pinned by the `x = 0` points (never below zero), `delta` is then the
/// largest slope keeping every `x < 0` point under the line, and finally `C` is lowered to the
/// tightest value admitting all points.
pub fn envelope_fit(points: &[(f64, f64)]) -> FitReport {
    let pts: Vec<(f64, f64)> =
        points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    if pts.is_empty() {
        return FitReport { c: f64::NAN, delta: f64::NAN, residual: f64::NAN, sample_count: 0, envelope_violations: 0 };
    }
    let c0 = pts.iter().filter(|p| p.0 == 0.0).map(|p| p.1).fold(0.0, f64::max);
    let delta = pts
        .iter()
        .filter(|p| p.0 < 0.0)
        .map(|&(x, y)| (y - c0) / x)
        .fold(f64::INFINITY, f64::min);
    let delta = if delta.is_finite() { delta } else { 1.0 };
    fixed_slope_fit(&pts, delta)
}

/// Tightest intercept for a prescribed slope.
pub fn fixed_slope_fit(points: &[(f64, f64)], delta: f64) -> FitReport {
    let c = points.iter().map(|&(x, y)| y - delta * x).fold(f64::NEG_INFINITY, f64::max);
    let violations = points
        .iter()
        .filter(|&&(x, y)| y > c + delta * x + ENVELOPE_TOL * (1.0 + y.abs()))
        .count();
    let residual =
        points.iter().map(|&(x, y)| c + delta * x - y).sum::<f64>() / points.len().max(1) as f64;
    FitReport { c: c.exp(), delta, residual, sample_count: points.len(), envelope_violations: violations }
}
