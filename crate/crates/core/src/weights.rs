//! Weights, Muckenhoupt-type constants over ball families, and the `w1 w2^(1-p)` constructor.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{HerzError, Result};
use crate::exponent::{conjugate, harmonic_average_nodes, VariableExponent};
use crate::fit::{envelope_fit, FitReport};
use crate::grid::{build_grid, integrate, Grid, GridFunction, GridSpec, Point, Region};
use crate::norms::luxemburg_raw;

/// Growth factor per resolution doubling that counts as a divergence step.
pub const DIVERGENCE_GROWTH: f64 = 1.25;
/// Consecutive divergence steps needed to flag a constant as infinite.
pub const DIVERGENCE_RUN: usize = 3;
/// Default center subsampling of [`BallFamily::ladder`].
pub const DEFAULT_STRIDE: usize = 8;

/// Weight recipes addressable by name in experiment configs.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightPreset {
    /// `const:<c>`
    Const(f64),
    /// `power:<a>`: `|x|^a`
    Power(f64),
    /// `product:<w1>,<w2>`: `w1 w2^(1 - p)`
    Product(Box<WeightPreset>, Box<WeightPreset>),
}

impl FromStr for WeightPreset {
    type Err = HerzError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || HerzError::Preset(s.to_string());
        let (name, args) = s.trim().split_once(':').ok_or_else(bad)?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        match name.trim() {
            "const" => {
                let c = num(args)?;
                if c > 0.0 && c.is_finite() {
                    Ok(WeightPreset::Const(c))
                } else {
                    Err(bad())
                }
            }
            "power" => Ok(WeightPreset::Power(num(args)?)),
            "product" => {
                // Split at the first comma that starts another preset name.
                let split = args
                    .char_indices()
                    .filter(|&(_, c)| c == ',')
                    .map(|(i, _)| i)
                    .find(|&i| args[i + 1..].trim_start().starts_with(|c: char| c.is_ascii_alphabetic()))
                    .ok_or_else(bad)?;
                let w1 = args[..split].parse::<WeightPreset>()?;
                let w2 = args[split + 1..].parse::<WeightPreset>()?;
                Ok(WeightPreset::Product(Box::new(w1), Box::new(w2)))
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for WeightPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightPreset::Const(c) => write!(f, "const:{c}"),
            WeightPreset::Power(a) => write!(f, "power:{a}"),
            WeightPreset::Product(a, b) => write!(f, "product:{a},{b}"),
        }
    }
}

/// A strictly positive, finite function on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    spec: GridSpec,
    values: Vec<f64>,
    label: String,
}

impl Weight {
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        Self::build(grid.spec(), values, "custom".into())
    }

    pub fn from_fn(grid: &Grid, w: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| w(grid.point(i))).collect();
        Self::build(grid.spec(), values, "custom".into())
    }

    /// `w = 1`.
    pub fn unit(grid: &Grid) -> Self {
        Self { spec: grid.spec(), values: vec![1.0; grid.len()], label: "const:1".into() }
    }

    /// `|x|^a`; finite at every node because no node sits at the origin.
    pub fn power(grid: &Grid, a: f64) -> Result<Self> {
        let values = grid.radii().iter().map(|&r| r.powf(a)).collect();
        Self::build(grid.spec(), values, format!("power:{a}"))
    }

    /// Builds a preset; `product` presets need the exponent of the constructor.
    pub fn from_preset(grid: &Grid, preset: &WeightPreset, p: Option<&VariableExponent>) -> Result<Self> {
        let mut w = match preset {
            WeightPreset::Const(c) => Self::build(grid.spec(), vec![*c; grid.len()], String::new())?,
            WeightPreset::Power(a) => Self::power(grid, *a)?,
            WeightPreset::Product(a, b) => {
                let p = p.ok_or_else(|| HerzError::Weight("product preset needs an exponent".into()))?;
                let w1 = Self::from_preset(grid, a, Some(p))?;
                let w2 = Self::from_preset(grid, b, Some(p))?;
                construct_weight(&w1, &w2, p)?
            }
        };
        w.label = preset.to_string();
        Ok(w)
    }

    fn build(spec: GridSpec, values: Vec<f64>, label: String) -> Result<Self> {
        let expected = spec_len(spec);
        if values.len() != expected {
            return Err(HerzError::SampleCount { expected, got: values.len() });
        }
        if let Some(i) = values.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(HerzError::Weight(format!("value {} at node {i} is not positive and finite", values[i])));
        }
        Ok(Self { spec, values, label })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn to_function(&self) -> GridFunction {
        GridFunction::from_raw(self.spec, self.values.clone())
    }
}

fn spec_len(spec: GridSpec) -> usize {
    let n = (2.0 * 2f64.powi(spec.k_max) * spec.points_per_unit as f64) as usize;
    n.pow(spec.dim as u32)
}

/// `w(S) = int_S w`.
pub fn weighted_measure(w: &Weight, region: &Region, grid: &Grid) -> Result<f64> {
    grid.check_same(w.spec)?;
    integrate(&w.to_function(), region, grid)
}

/// Pointwise `w1 w2^(1 - p)`.
pub fn construct_weight(w1: &Weight, w2: &Weight, p: &VariableExponent) -> Result<Weight> {
    if w1.spec != w2.spec || w1.spec != p.spec() {
        return Err(HerzError::GridMismatch);
    }
    let values = (0..w1.values.len())
        .map(|i| w1.values[i] * w2.values[i].powf(1.0 - p.at(i)))
        .collect();
    Weight::build(w1.spec, values, format!("product:{},{}", w1.label, w2.label))
}

/// Radii `2h * sqrt(2)^j` up to `2^(k_max+1)`; even steps are exact powers of two.
pub fn radius_ladder(grid: &Grid) -> Vec<f64> {
    let base = 2.0 * grid.spacing();
    let top = 2f64.powi(grid.spec().k_max + 1) * (1.0 + 1e-12);
    (0..)
        .map(|j: i32| {
            let r = base * 2f64.powi(j / 2);
            if j % 2 == 1 {
                r * SQRT_2
            } else {
                r
            }
        })
        .take_while(|&r| r <= top)
        .collect()
}

/// Every `stride`-th node along each axis, aligned so the node nearest the origin is included.
pub fn ladder_centers(grid: &Grid, stride: usize) -> Vec<Point> {
    let stride = stride.max(1);
    let n = grid.n_axis();
    let i0 = n / 2;
    let picks: Vec<usize> = (0..n).filter(|&i| i.abs_diff(i0) % stride == 0).collect();
    let ax = grid.axis();
    if grid.dim() == 1 {
        picks.iter().map(|&i| [ax[i], 0.0]).collect()
    } else {
        picks.iter().flat_map(|&r| picks.iter().map(move |&c| [ax[c], ax[r]])).collect()
    }
}

/// The search space of the "sup over balls" in every class constant: open balls `B(c, r)`,
/// clipped to the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BallFamily {
    centers: Vec<Point>,
    radii: Vec<f64>,
}

impl BallFamily {
    pub fn new(centers: Vec<Point>, mut radii: Vec<f64>) -> Result<Self> {
        if centers.is_empty() || radii.is_empty() {
            return Err(HerzError::Param("ball family must be nonempty".into()));
        }
        if radii.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(HerzError::Param("ball radii must be positive".into()));
        }
        radii.sort_by(f64::total_cmp);
        Ok(Self { centers, radii })
    }

    /// `radius_ladder` radii around every `stride`-th node.
    pub fn ladder(grid: &Grid, stride: usize) -> Self {
        Self { centers: ladder_centers(grid, stride), radii: radius_ladder(grid) }
    }

    /// Every node as a center.
    pub fn exhaustive(grid: &Grid) -> Self {
        Self::ladder(grid, 1)
    }

    /// Balls centered at the origin.
    pub fn origin(grid: &Grid) -> Self {
        Self { centers: vec![[0.0, 0.0]], radii: radius_ladder(grid) }
    }

    /// Fixed physical centers with the radius ladder of `grid`; used to compare resolutions.
    pub fn with_centers(grid: &Grid, centers: Vec<Point>) -> Result<Self> {
        Self::new(centers, radius_ladder(grid))
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.centers.len() * self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn balls(&self) -> Vec<(Point, f64)> {
        self.centers.iter().flat_map(|&c| self.radii.iter().map(move |&r| (c, r))).collect()
    }
}

/// Prefix sums and a sparse min table over the flattened node order, so that each contiguous
/// row run of a ball costs O(1).
struct RunStats {
    prefix: Vec<Vec<f64>>,
    min_table: Option<Vec<Vec<f64>>>,
}

impl RunStats {
    fn new(arrays: &[Vec<f64>], min_of: Option<&[f64]>) -> Self {
        let prefix = arrays
            .iter()
            .map(|a| {
                let mut p = Vec::with_capacity(a.len() + 1);
                let mut acc = 0.0;
                p.push(0.0);
                for &v in a {
                    acc += v;
                    p.push(acc);
                }
                p
            })
            .collect();
        let min_table = min_of.map(|a| {
            let mut table = vec![a.to_vec()];
            let mut width = 1;
            while 2 * width <= a.len() {
                let prev = table.last().unwrap();
                let next: Vec<f64> = (0..=a.len() - 2 * width).map(|i| prev[i].min(prev[i + width])).collect();
                table.push(next);
                width *= 2;
            }
            table
        });
        Self { prefix, min_table }
    }

    fn sum(&self, which: usize, a: usize, b: usize) -> f64 {
        self.prefix[which][b] - self.prefix[which][a]
    }

    fn min(&self, a: usize, b: usize) -> f64 {
        let t = self.min_table.as_ref().expect("min table");
        let level = (usize::BITS - 1 - (b - a).leading_zeros()) as usize;
        t[level][a].min(t[level][b - (1 << level)])
    }
}

fn max_over_balls(family: &BallFamily, per_ball: impl Fn(Point, f64) -> Option<f64> + Sync) -> f64 {
    family
        .balls()
        .into_par_iter()
        .filter_map(|(c, r)| per_ball(c, r))
        .reduce(|| 0.0, f64::max)
}

/// `max_B (avg_B w) (max_B w^(-1))`, a lower estimate of `[w]_{A_1}`.
pub fn a1_constant(w: &Weight, family: &BallFamily, grid: &Grid) -> Result<f64> {
    grid.check_same(w.spec)?;
    let stats = RunStats::new(&[w.values.clone()], Some(&w.values));
    Ok(max_over_balls(family, |c, r| {
        let (mut n, mut s, mut lo) = (0usize, 0.0, f64::INFINITY);
        grid.for_each_ball_row(c, r, true, |a, b| {
            n += b - a;
            s += stats.sum(0, a, b);
            lo = lo.min(stats.min(a, b));
        });
        (n > 0).then(|| (s / n as f64) / lo)
    }))
}

/// `max_B (avg_B w) (avg_B w^(-1/(p0-1)))^(p0-1)`.
pub fn ap_constant(w: &Weight, p0: f64, family: &BallFamily, grid: &Grid) -> Result<f64> {
    grid.check_same(w.spec)?;
    if !(p0 > 1.0) || !p0.is_finite() {
        return Err(HerzError::Param(format!("A_p needs p0 > 1, got {p0}")));
    }
    let dual: Vec<f64> = w.values.iter().map(|&v| v.powf(-1.0 / (p0 - 1.0))).collect();
    let stats = RunStats::new(&[w.values.clone(), dual], None);
    Ok(max_over_balls(family, |c, r| {
        let (mut n, mut s, mut t) = (0usize, 0.0, 0.0);
        grid.for_each_ball_row(c, r, true, |a, b| {
            n += b - a;
            s += stats.sum(0, a, b);
            t += stats.sum(1, a, b);
        });
        (n > 0).then(|| (s / n as f64) * (t / n as f64).powf(p0 - 1.0))
    }))
}

/// `max_B |B|^-1 ||w^(1/p) chi_B||_p ||w^(-1/p) chi_B||_{p'}`.
pub fn apvar_constant(w: &Weight, p: &VariableExponent, family: &BallFamily, grid: &Grid) -> Result<f64> {
    grid.check_same(w.spec)?;
    grid.check_same(p.spec())?;
    let pc = conjugate(p);
    let (ws, ps, pcs) = (w.values(), p.values(), pc.values());
    let inv: Vec<f64> = (0..ws.len()).map(|i| ws[i].powf(-1.0 / ps[i])).collect();
    let cell = grid.cell();
    Ok(max_over_balls(family, |c, r| {
        let nodes = grid.ball_nodes(c, r, true);
        if nodes.is_empty() {
            return None;
        }
        let a = luxemburg_raw(nodes.iter().map(|&i| (1.0, ps[i], ws[i])), cell);
        let b = luxemburg_raw(nodes.iter().map(|&i| (inv[i], pcs[i], 1.0)), cell);
        Some(a * b / (nodes.len() as f64 * cell))
    }))
}

/// `max_B |B|^(-p_B) ||w chi_B||_1 ||w^(-1) chi_B||_{p'/p}` with `p_B` the harmonic average.
pub fn atilde_constant(w: &Weight, p: &VariableExponent, family: &BallFamily, grid: &Grid) -> Result<f64> {
    grid.check_same(w.spec)?;
    grid.check_same(p.spec())?;
    let (ws, ps) = (w.values(), p.values());
    let ratio: Vec<f64> = ps.iter().map(|&v| 1.0 / (v - 1.0)).collect();
    let cell = grid.cell();
    Ok(max_over_balls(family, |c, r| {
        let nodes = grid.ball_nodes(c, r, true);
        if nodes.is_empty() {
            return None;
        }
        let measure = nodes.len() as f64 * cell;
        let p_b = harmonic_average_nodes(ps, &nodes).ok()?;
        let l1: f64 = nodes.iter().map(|&i| ws[i]).sum::<f64>() * cell;
        let dual = luxemburg_raw(nodes.iter().map(|&i| (1.0 / ws[i], ratio[i], 1.0)), cell);
        Some(measure.powf(-p_b) * l1 * dual)
    }))
}

/// Values of a class constant at successive resolution doublings.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceProbe {
    pub resolutions: Vec<u32>,
    pub values: Vec<f64>,
    /// `values[j+1] / values[j]`.
    pub growth: Vec<f64>,
    pub divergent: bool,
}

impl DivergenceProbe {
    pub fn finite(&self) -> bool {
        !self.divergent
    }
}

/// Evaluates `constant(grid, family)` on `base` and `levels - 1` refinements. Ball centers are
/// the stride-`stride` centers of the base grid, held fixed as physical points, while the radius
/// ladder follows each grid down to `2h`. Divergent means growth `>= DIVERGENCE_GROWTH` at
/// `DIVERGENCE_RUN` consecutive doublings.
pub fn probe_divergence(
    base: GridSpec,
    levels: usize,
    stride: usize,
    constant: impl Fn(&Grid, &BallFamily) -> Result<f64>,
) -> Result<DivergenceProbe> {
    if levels < DIVERGENCE_RUN + 1 {
        return Err(HerzError::Param(format!("divergence probe needs at least {} levels", DIVERGENCE_RUN + 1)));
    }
    let base_grid = build_grid(base)?;
    let centers = ladder_centers(&base_grid, stride);
    let mut spec = base;
    let mut resolutions = Vec::with_capacity(levels);
    let mut values = Vec::with_capacity(levels);
    for level in 0..levels {
        if level > 0 {
            spec = spec.refined();
        }
        let grid = if level == 0 { base_grid.clone() } else { build_grid(spec)? };
        let family = BallFamily::with_centers(&grid, centers.clone())?;
        resolutions.push(spec.points_per_unit);
        values.push(constant(&grid, &family)?);
    }
    let growth: Vec<f64> = values.windows(2).map(|v| v[1] / v[0]).collect();
    let mut run = 0;
    let mut divergent = values.iter().any(|v| !v.is_finite());
    for &g in &growth {
        run = if g >= DIVERGENCE_GROWTH { run + 1 } else { 0 };
        divergent |= run >= DIVERGENCE_RUN;
    }
    Ok(DivergenceProbe { resolutions, values, growth, divergent })
}

/// How `(B, E)` pairs with `E` inside `B` are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSampling {
    /// Nested balls centered at the origin.
    Concentric,
    /// Random balls inside the domain with random sub-balls.
    Random,
}

/// An outer ball `B` and an inner ball `E` contained in it, both open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallPair {
    pub outer: (Point, f64),
    pub inner: (Point, f64),
}

/// Seeded `(B, E)` pairs with radii between `2h` and `2^k_max`; every eighth pair has `E = B`.
/// Pairs come from a single stream, so a larger `trials` extends a smaller one.
pub fn sample_ball_pairs(grid: &Grid, mode: PairSampling, trials: usize, seed: u64) -> Vec<BallPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = grid.half_width();
    let lo = (2.0 * grid.spacing()).log2();
    let hi = grid.spec().k_max as f64;
    let dim = grid.dim();
    let mut out = Vec::with_capacity(trials);
    for t in 0..trials {
        let big_r = 2f64.powf(rng.gen_range(lo..=hi));
        let small_r = if t % 8 == 0 { big_r } else { 2f64.powf(rng.gen_range(lo..=big_r.log2())) };
        let pair = match mode {
            PairSampling::Concentric => BallPair { outer: ([0.0, 0.0], big_r), inner: ([0.0, 0.0], small_r) },
            PairSampling::Random => {
                let span = half - big_r;
                let mut c = [0.0, 0.0];
                for ci in c.iter_mut().take(dim) {
                    *ci = if span > 0.0 { rng.gen_range(-span..=span) } else { 0.0 };
                }
                let slack = big_r - small_r;
                let mut e = c;
                if slack > 0.0 {
                    let (dx, dy) = loop {
                        let dx = rng.gen_range(-1.0..=1.0);
                        let dy = if dim == 2 { rng.gen_range(-1.0..=1.0) } else { 0.0 };
                        if dx * dx + dy * dy <= 1.0 {
                            break (dx, dy);
                        }
                    };
                    e = [c[0] + slack * dx, c[1] + slack * dy];
                }
                BallPair { outer: (c, big_r), inner: (e, small_r) }
            }
        };
        out.push(pair);
    }
    out
}

/// Upper-envelope fit of `w(E)/w(B) <= C (|E|/|B|)^delta` over seeded pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureComparison {
    pub fit: FitReport,
    /// `fit.delta` clamped to `(0, 1]`.
    pub delta: f64,
}

pub fn a1_measure_comparison(
    w: &Weight,
    grid: &Grid,
    mode: PairSampling,
    trials: usize,
    seed: u64,
) -> Result<MeasureComparison> {
    grid.check_same(w.spec)?;
    let stats = RunStats::new(&[w.values.clone()], None);
    let mass = |(c, r): (Point, f64)| {
        let (mut n, mut s) = (0usize, 0.0);
        grid.for_each_ball_row(c, r, true, |a, b| {
            n += b - a;
            s += stats.sum(0, a, b);
        });
        (n as f64 * grid.cell(), s * grid.cell())
    };
    let points: Vec<(f64, f64)> = sample_ball_pairs(grid, mode, trials, seed)
        .into_iter()
        .filter_map(|pair| {
            let (mb, wb) = mass(pair.outer);
            let (me, we) = mass(pair.inner);
            (me > 0.0 && mb > 0.0).then(|| ((me / mb).ln(), (we / wb).ln()))
        })
        .collect();
    let fit = envelope_fit(&points);
    Ok(MeasureComparison { fit, delta: fit.delta.clamp(f64::MIN_POSITIVE, 1.0) })
}
