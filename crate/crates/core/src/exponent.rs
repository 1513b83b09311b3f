//! Variable exponents `p(.)` sampled on a grid.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HerzError, Result};
use crate::grid::{Grid, GridSpec, Point, Region};

/// Radial exponent recipes addressable by name in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExponentPreset {
    /// `const:<v>`
    Const(f64),
    /// `ramp:<a>,<b>`: `a + min(1, |x|) (b - a)`
    Ramp(f64, f64),
    /// `rational:<a>,<b>`: `a - b / (1 + |x|^2)`
    Rational(f64, f64),
}

impl ExponentPreset {
    pub fn eval(&self, p: Point) -> f64 {
        let r2 = p[0] * p[0] + p[1] * p[1];
        match *self {
            ExponentPreset::Const(v) => v,
            ExponentPreset::Ramp(a, b) => a + r2.sqrt().min(1.0) * (b - a),
            ExponentPreset::Rational(a, b) => a - b / (1.0 + r2),
        }
    }
}

impl FromStr for ExponentPreset {
    type Err = HerzError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || HerzError::Preset(s.to_string());
        let (name, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match (name.trim(), nums.as_slice()) {
            ("const", [v]) => Ok(ExponentPreset::Const(*v)),
            ("ramp", [a, b]) => Ok(ExponentPreset::Ramp(*a, *b)),
            ("rational", [a, b]) => Ok(ExponentPreset::Rational(*a, *b)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ExponentPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExponentPreset::Const(v) => write!(f, "const:{v}"),
            ExponentPreset::Ramp(a, b) => write!(f, "ramp:{a},{b}"),
            ExponentPreset::Rational(a, b) => write!(f, "rational:{a},{b}"),
        }
    }
}

/// An exponent in `P(R^n)` restricted to the grid: `1 < p_- <= p_+ < inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableExponent {
    spec: GridSpec,
    values: Vec<f64>,
    p_minus: f64,
    p_plus: f64,
    p_infinity: Option<f64>,
    label: String,
}

impl VariableExponent {
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        Self::build(grid.spec(), values, "custom".into())
    }

    pub fn from_fn(grid: &Grid, p: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| p(grid.point(i))).collect();
        Self::build(grid.spec(), values, "custom".into())
    }

    pub fn from_preset(grid: &Grid, preset: &ExponentPreset) -> Result<Self> {
        let values = (0..grid.len()).map(|i| preset.eval(grid.point(i))).collect();
        Self::build(grid.spec(), values, preset.to_string())
    }

    pub fn constant(grid: &Grid, p: f64) -> Result<Self> {
        Self::from_preset(grid, &ExponentPreset::Const(p))
    }

    fn build(spec: GridSpec, values: Vec<f64>, label: String) -> Result<Self> {
        let expected = spec_len(spec);
        if values.len() != expected {
            return Err(HerzError::SampleCount { expected, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(HerzError::NonFinite(i));
        }
        let (p_minus, p_plus) = min_max(&values);
        if !(p_minus > 1.0) {
            return Err(HerzError::Exponent(format!("p_- = {p_minus} must exceed 1")));
        }
        Ok(Self { spec, values, p_minus, p_plus, p_infinity: None, label })
    }

    /// Attaches the limit constant used by the log-Hoelder decay condition.
    pub fn with_p_infinity(mut self, p_inf: f64) -> Self {
        self.p_infinity = Some(p_inf);
        self
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn p_infinity(&self) -> Option<f64> {
        self.p_infinity
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_constant(&self) -> bool {
        self.p_minus == self.p_plus
    }
}

fn spec_len(spec: GridSpec) -> usize {
    let n = (2.0 * 2f64.powi(spec.k_max) * spec.points_per_unit as f64) as usize;
    n.pow(spec.dim as u32)
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Node minimum and maximum of `p`.
pub fn essential_bounds(p: &VariableExponent) -> (f64, f64) {
    (p.p_minus, p.p_plus)
}

/// Pointwise `p / (p - 1)`.
pub fn conjugate(p: &VariableExponent) -> VariableExponent {
    let values: Vec<f64> = p.values.iter().map(|&v| v / (v - 1.0)).collect();
    let (p_minus, p_plus) = min_max(&values);
    VariableExponent {
        spec: p.spec,
        values,
        p_minus,
        p_plus,
        p_infinity: p.p_infinity.map(|v| v / (v - 1.0)),
        label: format!("conj({})", p.label),
    }
}

/// Pointwise `r p(.)`; requires `r p_- > 1` so the result stays in `P(R^n)`.
pub fn scale(p: &VariableExponent, r: f64) -> Result<VariableExponent> {
    if !(r > 0.0) || !(r * p.p_minus > 1.0) {
        return Err(HerzError::ScaleWindow { r, p_minus: p.p_minus });
    }
    if r == 1.0 {
        return Ok(p.clone());
    }
    Ok(VariableExponent {
        spec: p.spec,
        values: p.values.iter().map(|&v| r * v).collect(),
        p_minus: r * p.p_minus,
        p_plus: r * p.p_plus,
        p_infinity: p.p_infinity.map(|v| r * v),
        label: format!("{r}*{}", p.label),
    })
}

/// `((1/|B|) int_B 1/p)^(-1)` over the nodes of `ball`.
pub fn harmonic_average(p: &VariableExponent, ball: &Region, grid: &Grid) -> Result<f64> {
    grid.check_same(p.spec)?;
    let nodes = ball.nodes(grid)?;
    harmonic_average_nodes(p.values(), &nodes)
}

pub(crate) fn harmonic_average_nodes(p: &[f64], nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(HerzError::EmptyRegion);
    }
    let mean_inv = nodes.iter().map(|&i| 1.0 / p[i]).sum::<f64>() / nodes.len() as f64;
    Ok(1.0 / mean_inv)
}

/// Sampled log-Hoelder constants. Both are lower estimates of the true suprema.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LhConstants {
    pub local: f64,
    /// `None` when the exponent carries no `p_infinity`.
    pub decay: Option<f64>,
}

impl LhConstants {
    pub fn decay(&self) -> Result<f64> {
        self.decay.ok_or(HerzError::MissingPInfinity)
    }
}

/// Log-Hoelder diagnostics.
///
/// The local constant maximizes `|p(x) - p(y)| (-log|x - y|)` over `pair_budget` seeded node pairs
/// with `0 < |x - y| <= 1/2`. Pairs are drawn from a single stream, so a larger budget scans a
/// superset of pairs and the estimate never decreases. The decay constant is an exhaustive scan of
/// `|p(x) - p_inf| log(e + |x|)`.
pub fn lh_constants(p: &VariableExponent, grid: &Grid, pair_budget: usize, seed: u64) -> Result<LhConstants> {
    grid.check_same(p.spec)?;
    let h = grid.spacing();
    let reach = (0.5 / h).floor() as i64;
    let n = grid.n_axis() as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut local: f64 = 0.0;
    if reach >= 1 {
        for _ in 0..pair_budget {
            let a = rng.gen_range(0..grid.len());
            let (dx, dy) = loop {
                let dx = rng.gen_range(-reach..=reach);
                let dy = if grid.dim() == 2 { rng.gen_range(-reach..=reach) } else { 0 };
                let d2 = (dx * dx + dy * dy) as f64 * h * h;
                if (dx, dy) != (0, 0) && d2 <= 0.25 {
                    break (dx, dy);
                }
            };
            let (col, row) = if grid.dim() == 1 { (a as i64, 0) } else { (a as i64 % n, a as i64 / n) };
            let (c2, r2) = (col + dx, row + dy);
            if c2 < 0 || c2 >= n || r2 < 0 || (grid.dim() == 2 && r2 >= n) {
                continue;
            }
            let b = (r2 * n + c2) as usize;
            let dist = ((dx * dx + dy * dy) as f64).sqrt() * h;
            local = local.max((p.values[a] - p.values[b]).abs() * (-dist.ln()));
        }
    }
    let decay = p.p_infinity.map(|p_inf| {
        (0..grid.len())
            .map(|i| (p.values[i] - p_inf).abs() * (std::f64::consts::E + grid.radius(i)).ln())
            .fold(0.0, f64::max)
    });
    Ok(LhConstants { local, decay })
}
