//! Truncated uniform sampling of R^n (n = 1 or 2), dyadic regions, and midpoint quadrature.
//!
//! Node `i` along each axis sits at `(i + 1/2) h - 2^k_max`, so the origin is never a node and
//! power weights `|x|^a` with `a < 0` stay finite everywhere on the grid. In two dimensions the
//! node index is `row * n_axis + col`, with `col` running along the first coordinate.

use serde::{Deserialize, Serialize};

use crate::error::{HerzError, Result};

/// Upper bound on the number of samples a single grid may hold.
pub const MAX_SAMPLES: usize = 1 << 26;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub k_min: i32,
    pub k_max: i32,
    pub points_per_unit: u32,
}

impl GridSpec {
    pub fn new(dim: usize, k_min: i32, k_max: i32, points_per_unit: u32) -> Self {
        Self { dim, k_min, k_max, points_per_unit }
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.points_per_unit as f64
    }

    /// Same domain and shell range at twice the resolution.
    pub fn refined(&self) -> Self {
        Self { points_per_unit: self.points_per_unit * 2, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HerzError::InvalidGrid(msg));
        if self.dim != 1 && self.dim != 2 {
            return bad(format!("dim must be 1 or 2, got {}", self.dim));
        }
        if self.points_per_unit == 0 {
            return bad("points_per_unit must be positive".into());
        }
        if self.k_min >= self.k_max {
            return bad(format!("k_min < k_max required, got {} >= {}", self.k_min, self.k_max));
        }
        if !(-30..=30).contains(&self.k_min) || !(-30..=30).contains(&self.k_max) {
            return bad("shell indices must lie in [-30, 30]".into());
        }
        let h = self.spacing();
        if 2f64.powi(self.k_min) < 4.0 * h {
            return bad(format!(
                "2^k_min = {} < 4h = {}: innermost shell needs 4 samples per radius",
                2f64.powi(self.k_min),
                4.0 * h
            ));
        }
        let per_axis = 2.0 * 2f64.powi(self.k_max) * self.points_per_unit as f64;
        if per_axis.fract() != 0.0 {
            return bad(format!("2^(k_max+1) * points_per_unit = {per_axis} is not an integer"));
        }
        let total = per_axis.powi(self.dim as i32);
        if total > MAX_SAMPLES as f64 {
            return bad(format!("{total} samples exceeds the cap of 2^26"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    spec: GridSpec,
    h: f64,
    half_width: f64,
    n_axis: usize,
    axis: Vec<f64>,
    radius: Vec<f64>,
    shell: Vec<i32>,
}

/// Validates `spec` and materializes node coordinates.
pub fn build_grid(spec: GridSpec) -> Result<Grid> {
    spec.validate()?;
    let h = spec.spacing();
    let half_width = 2f64.powi(spec.k_max);
    let n_axis = (2.0 * half_width * spec.points_per_unit as f64) as usize;
    let axis: Vec<f64> = (0..n_axis).map(|i| (i as f64 + 0.5) * h - half_width).collect();
    let len = n_axis.pow(spec.dim as u32);
    let mut radius = Vec::with_capacity(len);
    for idx in 0..len {
        let p = point_of(&axis, n_axis, spec.dim, idx);
        radius.push((p[0] * p[0] + p[1] * p[1]).sqrt());
    }
    let shell = radius.iter().map(|&r| dyadic_index(r)).collect();
    Ok(Grid { spec, h, half_width, n_axis, axis, radius, shell })
}

fn point_of(axis: &[f64], n_axis: usize, dim: usize, idx: usize) -> Point {
    if dim == 1 {
        [axis[idx], 0.0]
    } else {
        [axis[idx % n_axis], axis[idx / n_axis]]
    }
}

const TIE_TOL: f64 = 1e-12;

/// Ball membership for squared distance `d2`. Ladder radii such as `2h sqrt 2` meet lattice
/// distances exactly, so points within a relative `1e-12` of the sphere are treated as lying on
/// it: outside an open ball, inside a closed one. Rounding of `r * r` never decides.
pub fn in_ball(d2: f64, r: f64, open: bool) -> bool {
    let r2 = r * r;
    if open {
        d2 < r2 * (1.0 - TIE_TOL)
    } else {
        d2 <= r2 * (1.0 + TIE_TOL)
    }
}

/// Smallest integer `k` with `r <= 2^k`, i.e. the shell `D_k` containing a point at radius `r`.
fn dyadic_index(r: f64) -> i32 {
    let mut k = r.log2().ceil() as i32;
    while 2f64.powi(k) < r {
        k += 1;
    }
    while 2f64.powi(k - 1) >= r {
        k -= 1;
    }
    k
}

impl Grid {
    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Measure of one node cell, `h^n`.
    pub fn cell(&self) -> f64 {
        self.h.powi(self.spec.dim as i32)
    }

    /// Half-width `2^k_max` of the sampled cube.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_axis(&self) -> usize {
        self.n_axis
    }

    pub fn len(&self) -> usize {
        self.radius.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radius.is_empty()
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn point(&self, idx: usize) -> Point {
        point_of(&self.axis, self.n_axis, self.spec.dim, idx)
    }

    pub fn radius(&self, idx: usize) -> f64 {
        self.radius[idx]
    }

    pub fn radii(&self) -> &[f64] {
        &self.radius
    }

    /// Dyadic shell index of a node: the `k` with `2^(k-1) < |x| <= 2^k`.
    pub fn shell_of(&self, idx: usize) -> i32 {
        self.shell[idx]
    }

    pub fn shell_range(&self) -> std::ops::RangeInclusive<i32> {
        self.spec.k_min..=self.spec.k_max
    }

    pub fn shell_count(&self) -> usize {
        (self.spec.k_max - self.spec.k_min + 1) as usize
    }

    /// Node nearest to `p` (clamped to the grid).
    pub fn nearest_node(&self, p: Point) -> usize {
        let to_index = |c: f64| -> usize {
            let i = ((c + self.half_width) / self.h - 0.5).round();
            i.clamp(0.0, (self.n_axis - 1) as f64) as usize
        };
        if self.spec.dim == 1 {
            to_index(p[0])
        } else {
            to_index(p[1]) * self.n_axis + to_index(p[0])
        }
    }

    /// Nodes within distance `radius` of `center`, clipped to the grid. `open` excludes the sphere.
    pub fn ball_nodes(&self, center: Point, radius: f64, open: bool) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_ball_row(center, radius, open, |start, end| out.extend(start..end));
        out
    }

    /// Calls `visit(start, end)` for each contiguous run of node indices inside the ball.
    pub(crate) fn for_each_ball_row(
        &self,
        center: Point,
        radius: f64,
        open: bool,
        mut visit: impl FnMut(usize, usize),
    ) {
        let inside = |d2: f64| in_ball(d2, radius, open);
        let axis_range = |c: f64, half: f64| -> (usize, usize) {
            let lo = ((c - half + self.half_width) / self.h - 0.5).floor() as i64 - 1;
            let hi = ((c + half + self.half_width) / self.h - 0.5).ceil() as i64 + 1;
            let lo = lo.max(0) as usize;
            let hi = (hi.max(-1) + 1).min(self.n_axis as i64).max(0) as usize;
            (lo, hi.max(lo))
        };
        let row_run = |cx: f64, dy2: f64, row_base: usize, visit: &mut dyn FnMut(usize, usize)| {
            let rem = radius * radius * (1.0 + TIE_TOL) - dy2;
            if rem < 0.0 {
                return;
            }
            let (lo, hi) = axis_range(cx, rem.sqrt());
            let mut start = None;
            let mut end = lo;
            for i in lo..hi {
                let dx = self.axis[i] - cx;
                if inside(dx * dx + dy2) {
                    if start.is_none() {
                        start = Some(i);
                    }
                    end = i + 1;
                }
            }
            if let Some(s) = start {
                visit(row_base + s, row_base + end);
            }
        };
        if self.spec.dim == 1 {
            row_run(center[0], 0.0, 0, &mut visit);
        } else {
            let (rlo, rhi) = axis_range(center[1], radius);
            for row in rlo..rhi {
                let dy = self.axis[row] - center[1];
                row_run(center[0], dy * dy, row * self.n_axis, &mut visit);
            }
        }
    }

    pub(crate) fn check_same(&self, spec: GridSpec) -> Result<()> {
        if spec == self.spec {
            Ok(())
        } else {
            Err(HerzError::GridMismatch)
        }
    }
}

/// Subsets of the grid domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Closed ball `{|x - center| <= radius}`.
    Ball { center: Point, radius: f64 },
    /// Dyadic annulus `D_k = B_k \ B_(k-1)`.
    Shell(i32),
    /// `C_m`: equals `D_m` for `m >= 1` and `B_0` for `m = 0`.
    NonhomShell(u32),
    Mask(Vec<bool>),
    /// Every node of the grid.
    Domain,
}

impl Region {
    /// `B_k = {|x| <= 2^k}`.
    pub fn dyadic_ball(k: i32) -> Self {
        Region::Ball { center: [0.0, 0.0], radius: 2f64.powi(k) }
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        let spec = grid.spec();
        match self {
            Region::Ball { center, radius } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(HerzError::Region(format!("ball radius {radius} must be positive")));
                }
                let slack = 1e-12 * grid.half_width();
                for c in center.iter().take(spec.dim) {
                    if c.abs() + radius > grid.half_width() + slack {
                        return Err(HerzError::Region(format!(
                            "ball at {center:?} radius {radius} leaves [-{w}, {w}]^n",
                            w = grid.half_width()
                        )));
                    }
                }
                Ok(())
            }
            Region::Shell(k) => {
                if grid.shell_range().contains(k) {
                    Ok(())
                } else {
                    Err(HerzError::Region(format!(
                        "shell {k} outside [{}, {}]",
                        spec.k_min, spec.k_max
                    )))
                }
            }
            Region::NonhomShell(m) => {
                if (*m as i64) <= spec.k_max as i64 && (*m == 0 || *m as i32 >= spec.k_min) {
                    Ok(())
                } else {
                    Err(HerzError::Region(format!("C_{m} outside the grid's shell range")))
                }
            }
            Region::Mask(mask) => {
                if mask.len() == grid.len() {
                    Ok(())
                } else {
                    Err(HerzError::SampleCount { expected: grid.len(), got: mask.len() })
                }
            }
            Region::Domain => Ok(()),
        }
    }

    /// Membership of node `idx`; callers must have checked the region against the grid.
    pub fn contains(&self, grid: &Grid, idx: usize) -> bool {
        match self {
            Region::Ball { center, radius } => {
                let p = grid.point(idx);
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                in_ball(dx * dx + dy * dy, *radius, false)
            }
            Region::Shell(k) => grid.shell_of(idx) == *k,
            Region::NonhomShell(0) => grid.shell_of(idx) <= 0,
            Region::NonhomShell(m) => grid.shell_of(idx) == *m as i32,
            Region::Mask(mask) => mask[idx],
            Region::Domain => true,
        }
    }

    pub fn nodes(&self, grid: &Grid) -> Result<Vec<usize>> {
        self.check(grid)?;
        Ok(match self {
            Region::Ball { center, radius } => grid.ball_nodes(*center, *radius, false),
            Region::Domain => (0..grid.len()).collect(),
            _ => (0..grid.len()).filter(|&i| self.contains(grid, i)).collect(),
        })
    }
}

/// Real samples, one per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    samples: Vec<f64>,
}

impl GridFunction {
    pub fn from_samples(grid: &Grid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(HerzError::SampleCount { expected: grid.len(), got: samples.len() });
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(HerzError::NonFinite(i));
        }
        Ok(Self { spec: grid.spec(), samples })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(Point) -> f64) -> Result<Self> {
        let samples = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self::from_samples(grid, samples)
    }

    /// Wraps samples already known to be finite and of the right length.
    pub(crate) fn from_raw(spec: GridSpec, samples: Vec<f64>) -> Self {
        debug_assert!(samples.iter().all(|v| v.is_finite()));
        Self { spec, samples }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { spec: grid.spec(), samples: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self { spec: grid.spec(), samples: vec![c; grid.len()] }
    }

    pub fn indicator(grid: &Grid, region: &Region) -> Result<Self> {
        region.check(grid)?;
        let samples = (0..grid.len())
            .map(|i| if region.contains(grid, i) { 1.0 } else { 0.0 })
            .collect();
        Ok(Self { spec: grid.spec(), samples })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { spec: self.spec, samples: self.samples.iter().map(|&v| f(v)).collect() }
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Pointwise combination of two functions on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.spec != other.spec {
            return Err(HerzError::GridMismatch);
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { spec: self.spec, samples })
    }

    pub fn restricted(&self, grid: &Grid, region: &Region) -> Result<Self> {
        grid.check_same(self.spec)?;
        region.check(grid)?;
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, &v)| if region.contains(grid, i) { v } else { 0.0 })
            .collect();
        Ok(Self { spec: self.spec, samples })
    }

    /// Keeps the samples at nodes where `keep(idx)` holds.
    pub fn restricted_by(&self, keep: impl Fn(usize) -> bool) -> Self {
        let samples =
            self.samples.iter().enumerate().map(|(i, &v)| if keep(i) { v } else { 0.0 }).collect();
        Self { spec: self.spec, samples }
    }
}

/// Node count in `region` times `h^n`.
pub fn measure(region: &Region, grid: &Grid) -> Result<f64> {
    region.check(grid)?;
    let count = match region {
        Region::Ball { center, radius } => {
            let mut n = 0usize;
            grid.for_each_ball_row(*center, *radius, false, |s, e| n += e - s);
            n
        }
        Region::Domain => grid.len(),
        _ => (0..grid.len()).filter(|&i| region.contains(grid, i)).count(),
    };
    Ok(count as f64 * grid.cell())
}

/// Midpoint rule: `sum f(x_i) h^n` over the nodes of `region`.
pub fn integrate(f: &GridFunction, region: &Region, grid: &Grid) -> Result<f64> {
    grid.check_same(f.spec())?;
    region.check(grid)?;
    let s = &f.samples;
    let sum: f64 = match region {
        Region::Domain => s.iter().sum(),
        Region::Ball { center, radius } => {
            let mut acc = 0.0;
            grid.for_each_ball_row(*center, *radius, false, |a, b| {
                acc += s[a..b].iter().sum::<f64>()
            });
            acc
        }
        _ => (0..grid.len()).filter(|&i| region.contains(grid, i)).map(|i| s[i]).sum(),
    };
    Ok(sum * grid.cell())
}

/// Splits `f` into dyadic shell pieces `f * chi_k` (homogeneous, `k` over the grid's shell range)
/// or `f * chi_(C_m)` (non-homogeneous, `m` in `0..=k_max`). Each piece is tagged with its index.
pub fn shell_decompose(f: &GridFunction, homogeneous: bool, grid: &Grid) -> Result<Vec<(i32, GridFunction)>> {
    grid.check_same(f.spec())?;
    let spec = grid.spec();
    let indices: Vec<i32> = if homogeneous {
        grid.shell_range().collect()
    } else {
        (0..=spec.k_max.max(0)).collect()
    };
    let pieces = indices
        .into_iter()
        .map(|k| {
            let piece = if homogeneous || k > 0 {
                f.restricted_by(|i| grid.shell_of(i) == k)
            } else {
                f.restricted_by(|i| grid.shell_of(i) <= 0)
            };
            (k, piece)
        })
        .collect();
    Ok(pieces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(k_min: i32, k_max: i32, ppu: u32) -> Grid {
        build_grid(GridSpec::new(1, k_min, k_max, ppu)).unwrap()
    }

    #[test]
    fn node_counts() {
        let g = grid1(0, 3, 4);
        assert_eq!(g.len(), 64);
        assert_eq!(g.axis()[0], -8.0 + 0.125);
        assert_eq!(g.axis()[63], 8.0 - 0.125);
        let g2 = build_grid(GridSpec::new(2, -1, 1, 2)).unwrap_err();
        assert!(matches!(g2, HerzError::InvalidGrid(_)));
        let g2 = build_grid(GridSpec::new(2, 0, 1, 4)).unwrap();
        assert_eq!(g2.len(), 16 * 16);
        let g3 = build_grid(GridSpec::new(2, 1, 2, 2)).unwrap();
        assert_eq!(g3.n_axis(), 8 * 2);
    }

    #[test]
    fn coarse_two_dim_layout_is_rejected() {
        // k_max = 1 at ppu = 2 would give 8 x 8 nodes, but no k_min < 1 satisfies 2^k_min >= 4h = 2.
        for k_min in -3..1 {
            assert!(GridSpec::new(2, k_min, 1, 2).validate().is_err());
        }
    }

    #[test]
    fn rejects_unresolved_inner_shell() {
        let err = GridSpec::new(1, -2, 3, 4).validate().unwrap_err();
        match err {
            HerzError::InvalidGrid(msg) => assert!(msg.contains("4h")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new(3, 0, 2, 8).validate().is_err());
        assert!(GridSpec::new(1, 2, 2, 8).validate().is_err());
        assert!(GridSpec::new(1, 0, 2, 0).validate().is_err());
        assert!(GridSpec::new(2, 0, 12, 1024).validate().is_err());
    }

    #[test]
    fn dyadic_measures_1d() {
        let g = grid1(-2, 3, 16);
        assert_eq!(measure(&Region::dyadic_ball(2), &g).unwrap(), 8.0);
        assert_eq!(measure(&Region::Shell(2), &g).unwrap(), 4.0);
        assert_eq!(measure(&Region::NonhomShell(0), &g).unwrap(), 2.0);
        for k in -2..3 {
            let a = measure(&Region::dyadic_ball(k + 1), &g).unwrap();
            let b = measure(&Region::dyadic_ball(k), &g).unwrap();
            assert_eq!(a / b, 2.0);
        }
        assert!(measure(&Region::Shell(4), &g).is_err());
        let outside = Region::Ball { center: [7.0, 0.0], radius: 2.0 };
        assert!(measure(&outside, &g).is_err());
    }

    #[test]
    fn integrate_basics() {
        let g = grid1(-2, 3, 16);
        let f = GridFunction::indicator(&g, &Region::dyadic_ball(0)).unwrap();
        assert_eq!(integrate(&f, &Region::Domain, &g).unwrap(), 2.0);
        let z = GridFunction::zeros(&g);
        assert_eq!(integrate(&z, &Region::Domain, &g).unwrap(), 0.0);
    }

    #[test]
    fn shell_pieces_partition() {
        let g = grid1(-2, 3, 16);
        let f = GridFunction::from_fn(&g, |p| (p[0] * 1.3).sin() + 0.2).unwrap();
        let pieces = shell_decompose(&f, true, &g).unwrap();
        assert_eq!(pieces.len(), 6);
        for i in 0..g.len() {
            let sum: f64 = pieces.iter().map(|(_, p)| p.samples()[i]).sum();
            let r = g.radius(i);
            let expected = if r > 0.125 && r <= 8.0 { f.samples()[i] } else { 0.0 };
            assert_eq!(sum, expected);
            let nonzero = pieces.iter().filter(|(_, p)| p.samples()[i] != 0.0).count();
            assert!(nonzero <= 1);
        }
    }

    #[test]
    fn single_shell_indicator() {
        let g = grid1(-2, 3, 16);
        let f = GridFunction::indicator(&g, &Region::Shell(3)).unwrap();
        for (k, p) in shell_decompose(&f, true, &g).unwrap() {
            assert_eq!(!p.is_zero(), k == 3);
        }
        let b0 = GridFunction::indicator(&g, &Region::dyadic_ball(0)).unwrap();
        let pieces = shell_decompose(&b0, false, &g).unwrap();
        assert_eq!(pieces.len(), 4);
        assert_eq!(pieces[0].1, b0);
        assert!(pieces[1..].iter().all(|(_, p)| p.is_zero()));
    }

    #[test]
    fn ball_rows_2d_match_bruteforce() {
        let g = build_grid(GridSpec::new(2, 0, 2, 4)).unwrap();
        for &(c, r, open) in &[([0.3, -1.1], 1.7, false), ([3.9, 3.9], 2.0, true), ([0.0, 0.0], 4.0, false)] {
            let fast = g.ball_nodes(c, r, open);
            let brute: Vec<usize> = (0..g.len())
                .filter(|&i| {
                    let p = g.point(i);
                    let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                    if open { d2 < r * r } else { d2 <= r * r }
                })
                .collect();
            assert_eq!(fast, brute);
        }
    }

    #[test]
    fn nearest_node_roundtrip() {
        let g = build_grid(GridSpec::new(2, 0, 2, 4)).unwrap();
        for idx in [0, 17, 200, g.len() - 1] {
            assert_eq!(g.nearest_node(g.point(idx)), idx);
        }
    }
}
