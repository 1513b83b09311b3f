//! Analytic test functions, resampled at every resolution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Grid, GridFunction, GridSpec, Point};

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `(1 - |x - center|^2 / radius^2)_+^power`
    Bump { center: Point, radius: f64, power: u32 },
    /// `chi_(D_k)`
    ShellIndicator { k: i32 },
    /// `sum c_k chi_(D_k)`
    Lacunary { terms: Vec<(i32, f64)> },
    /// `sum a cos(omega . x + phase) exp(-|x|^2 / (2 scale^2))`
    SmoothField { modes: Vec<(Point, f64, f64)>, scale: f64 },
}

fn in_shell(r: f64, k: i32) -> bool {
    r > 2f64.powi(k - 1) && r <= 2f64.powi(k)
}

impl TestFunction {
    pub fn eval(&self, x: Point) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1];
        match self {
            TestFunction::Bump { center, radius, power } => {
                let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                let s = 1.0 - d2 / (radius * radius);
                if s > 0.0 {
                    s.powi(*power as i32)
                } else {
                    0.0
                }
            }
            TestFunction::ShellIndicator { k } => {
                if in_shell(r2.sqrt(), *k) {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Lacunary { terms } => {
                let r = r2.sqrt();
                terms.iter().filter(|(k, _)| in_shell(r, *k)).map(|(_, c)| c).sum()
            }
            TestFunction::SmoothField { modes, scale } => {
                let env = (-r2 / (2.0 * scale * scale)).exp();
                modes.iter().map(|(w, ph, a)| a * (w[0] * x[0] + w[1] * x[1] + ph).cos()).sum::<f64>() * env
            }
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<GridFunction> {
        GridFunction::from_fn(grid, |x| self.eval(x))
    }

    pub fn family(&self) -> &'static str {
        match self {
            TestFunction::Bump { .. } => "bump",
            TestFunction::ShellIndicator { .. } => "shell",
            TestFunction::Lacunary { .. } => "lacunary",
            TestFunction::SmoothField { .. } => "smooth",
        }
    }
}

/// A named test function.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub id: String,
    pub f: TestFunction,
}

/// Test-function families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteFamily {
    Bump,
    Shell,
    Lacunary,
    Smooth,
}

impl SuiteFamily {
    pub const ALL: [SuiteFamily; 4] = [SuiteFamily::Bump, SuiteFamily::Shell, SuiteFamily::Lacunary, SuiteFamily::Smooth];
}

/// `count` seeded functions cycling through bumps, shell indicators, lacunary shell sums and
/// smooth random fields, all supported inside the domain of `spec`.
pub fn build_suite(spec: GridSpec, count: usize, seed: u64) -> Vec<SuiteEntry> {
    build_suite_from(spec, &SuiteFamily::ALL, count, seed)
}

/// Like [`build_suite`], cycling through `families` only. An empty list yields an empty suite.
pub fn build_suite_from(spec: GridSpec, families: &[SuiteFamily], count: usize, seed: u64) -> Vec<SuiteEntry> {
    if families.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (k_min, k_max) = (spec.k_min, spec.k_max);
    let half = 2f64.powi(k_max);
    let dim = spec.dim;
    (0..count)
        .map(|i| {
            let f = match families[i % families.len()] {
                SuiteFamily::Bump => {
                    let radius = 2f64.powf(rng.gen_range(k_min as f64..(k_max - 1) as f64));
                    let span = half - radius;
                    let mut center = [0.0, 0.0];
                    for c in center.iter_mut().take(dim) {
                        *c = rng.gen_range(-span..span);
                    }
                    TestFunction::Bump { center, radius, power: rng.gen_range(1..=3) }
                }
                SuiteFamily::Shell => TestFunction::ShellIndicator { k: rng.gen_range(k_min..=k_max) },
                SuiteFamily::Lacunary => {
                    let n_terms = rng.gen_range(2..=4);
                    let mut terms: Vec<(i32, f64)> = Vec::new();
                    while terms.len() < n_terms {
                        let k = rng.gen_range(k_min..=k_max);
                        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                        let c = sign * rng.gen_range(0.25..2.0);
                        if terms.iter().all(|t| t.0 != k) {
                            terms.push((k, c));
                        }
                    }
                    terms.sort_by_key(|t| t.0);
                    TestFunction::Lacunary { terms }
                }
                SuiteFamily::Smooth => {
                    let scale = 2f64.powi(k_max - 2) * rng.gen_range(0.5..1.0);
                    let modes = (0..3)
                        .map(|_| {
                            let w = [rng.gen_range(-2.0..2.0), if dim == 2 { rng.gen_range(-2.0..2.0) } else { 0.0 }];
                            (w, rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.5..1.0))
                        })
                        .collect();
                    TestFunction::SmoothField { modes, scale }
                }
            };
            SuiteEntry { id: format!("{}-{i:02}", f.family()), f }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn suite_is_seeded_and_nonzero() {
        let spec = GridSpec::new(1, -2, 4, 16);
        let a = build_suite(spec, 20, 3);
        assert_eq!(a, build_suite(spec, 20, 3));
        assert_ne!(a, build_suite(spec, 20, 4));
        let g = build_grid(spec).unwrap();
        for e in &a {
            assert!(!e.f.sample(&g).unwrap().is_zero(), "{}", e.id);
        }
        let families: std::collections::BTreeSet<_> = a.iter().map(|e| e.f.family()).collect();
        assert_eq!(families.len(), 4);
    }
}
