//! Maximal and Rubio de Francia operators, the `C_beta` kernel dictionary, and the computable
//! intrinsic square function.

use std::f64::consts::LN_2;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::conv::{ConvBackend, Convolver, Stencil};
use crate::error::{HerzError, Result};
use crate::grid::{in_ball, Grid, GridFunction, Point};

// ---------------------------------------------------------------------------------------------
// Maximal operator

/// Prefix sums kept in double-double so that window sums of nonnegative data stay accurate even
/// when the running total dwarfs the window.
struct DdPrefix {
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl DdPrefix {
    fn new(values: impl Iterator<Item = f64>) -> Self {
        let (mut hi, mut lo) = (vec![0.0], vec![0.0]);
        let (mut s, mut e) = (0.0f64, 0.0f64);
        for v in values {
            let t = s + v;
            let bp = t - s;
            e += (s - (t - bp)) + (v - bp);
            s = t;
            hi.push(s);
            lo.push(e);
        }
        Self { hi, lo }
    }

    fn sum(&self, a: usize, b: usize) -> f64 {
        (self.hi[b] - self.hi[a]) + (self.lo[b] - self.lo[a])
    }
}

/// Largest integer `m >= 0` with `m h < r`.
fn open_reach(r: f64, h: f64) -> usize {
    let mut m = (r / h).ceil() as usize + 1;
    while m > 0 && !in_ball((m as f64 * h).powi(2), r, true) {
        m -= 1;
    }
    m
}

/// Centered maximal function `Mf(x) = max_r (1/|B(x,r)|) int_B(x,r) |f|` over open balls with
/// the given radii, clipped to the grid, together with the degenerate radius `0` term `|f(x)|`.
pub fn maximal(f: &GridFunction, radii: &[f64], grid: &Grid) -> Result<GridFunction> {
    grid.check_same(f.spec())?;
    let abs: Vec<f64> = f.samples().iter().map(|v| v.abs()).collect();
    let out = maximal_raw(&abs, radii, grid);
    GridFunction::from_samples(grid, out)
}

fn maximal_raw(abs: &[f64], radii: &[f64], grid: &Grid) -> Vec<f64> {
    let n = grid.n_axis();
    let h = grid.spacing();
    let reaches: Vec<usize> = radii.iter().map(|&r| open_reach(r, h)).collect();
    if grid.dim() == 1 {
        let pre = DdPrefix::new(abs.iter().copied());
        return (0..n)
            .into_par_iter()
            .map(|i| {
                let mut best = abs[i];
                for &m in &reaches {
                    let lo = i.saturating_sub(m);
                    let hi = (i + m).min(n - 1);
                    best = best.max(pre.sum(lo, hi + 1) / (hi + 1 - lo) as f64);
                }
                best
            })
            .collect();
    }
    let rows: Vec<DdPrefix> = (0..n).map(|r| DdPrefix::new(abs[r * n..(r + 1) * n].iter().copied())).collect();
    // Half-widths of each radius' disc per row offset.
    let discs: Vec<Vec<usize>> = radii
        .iter()
        .zip(&reaches)
        .map(|(&r, &m)| {
            (0..=m)
                .map(|dy| {
                    let rem = r * r - (dy as f64 * h).powi(2);
                    let mut w = open_reach(rem.max(0.0).sqrt(), h) + 1;
                    while w > 0 && !in_ball(((w * w + dy * dy) as f64) * h * h, r, true) {
                        w -= 1;
                    }
                    w
                })
                .collect()
        })
        .collect();
    (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (col, row) = (idx % n, idx / n);
            let mut best = abs[idx];
            for widths in &discs {
                let m = widths.len() - 1;
                let (mut s, mut count) = (0.0, 0usize);
                for r in row.saturating_sub(m)..=(row + m).min(n - 1) {
                    let w = widths[r.abs_diff(row)];
                    let lo = col.saturating_sub(w);
                    let hi = (col + w).min(n - 1);
                    s += rows[r].sum(lo, hi + 1);
                    count += hi + 1 - lo;
                }
                best = best.max(s / count as f64);
            }
            best
        })
        .collect()
}

// ---------------------------------------------------------------------------------------------
// Rubio de Francia

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RubioConfig {
    /// Surrogate for the operator norm of `M` on the associate space.
    pub a: f64,
    /// Truncation order.
    pub k: usize,
}

impl RubioConfig {
    pub fn new(a: f64, k: usize) -> Result<Self> {
        if !(a >= 1.0) || !a.is_finite() || k == 0 {
            return Err(HerzError::Param(format!("Rubio de Francia needs A >= 1 and K >= 1, got A = {a}, K = {k}")));
        }
        Ok(Self { a, k })
    }

    /// `(2A)^(-K)`.
    pub fn tail_bound(&self) -> f64 {
        (2.0 * self.a).powi(-(self.k as i32))
    }
}

impl Default for RubioConfig {
    fn default() -> Self {
        Self { a: 1.0, k: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RubioOutput {
    /// `Rg = sum_{k=0}^{K} M^k g / (2A)^k` with `M^0 g = |g|`.
    pub rg: GridFunction,
    /// `(2A)^(-K) ||M^(K+1) g||_inf / max(min Rg, floor)`, so that `M(Rg) <= 2A Rg (1 + tau)`.
    pub tau: f64,
    pub tail_bound: f64,
    /// `||M^(K+1) g||_inf`.
    pub next_iterate_sup: f64,
}

const RUBIO_FLOOR: f64 = 1e-300;

pub fn rubio_francia(g: &GridFunction, cfg: RubioConfig, radii: &[f64], grid: &Grid) -> Result<RubioOutput> {
    grid.check_same(g.spec())?;
    let cfg = RubioConfig::new(cfg.a, cfg.k)?;
    let mut iterate: Vec<f64> = g.samples().iter().map(|v| v.abs()).collect();
    let mut rg = iterate.clone();
    let mut factor = 1.0;
    for _ in 1..=cfg.k {
        iterate = maximal_raw(&iterate, radii, grid);
        factor /= 2.0 * cfg.a;
        for (r, &m) in rg.iter_mut().zip(&iterate) {
            *r += m * factor;
        }
    }
    let next = maximal_raw(&iterate, radii, grid);
    let next_sup = next.iter().fold(0.0f64, |m, &v| m.max(v));
    if rg.iter().any(|v| !v.is_finite()) || !next_sup.is_finite() {
        return Err(HerzError::Overflow(format!("Rubio de Francia sum with K = {}", cfg.k)));
    }
    let rg_min = rg.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let tau = if next_sup == 0.0 { 0.0 } else { cfg.tail_bound() * next_sup / rg_min.max(RUBIO_FLOOR) };
    Ok(RubioOutput {
        rg: GridFunction::from_raw(grid.spec(), rg),
        tau,
        tail_bound: cfg.tail_bound(),
        next_iterate_sup: next_sup,
    })
}

// ---------------------------------------------------------------------------------------------
// C_beta dictionary

/// `c (b_m(kappa (x - x0)) - b_m(kappa (x + x0)))` with `b_m(z) = (1 - |z|^2)_+^m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub m: u32,
    pub kappa: f64,
    pub x0: Point,
    pub c: f64,
}

fn bump(m: u32, z0: f64, z1: f64) -> f64 {
    let s = 1.0 - (z0 * z0 + z1 * z1);
    if s > 0.0 {
        s.powi(m as i32)
    } else {
        0.0
    }
}

impl Kernel {
    /// Odd in `x` bit for bit, so symmetric stencils cancel.
    pub fn eval(&self, x: Point) -> f64 {
        let k = self.kappa;
        let a = bump(self.m, k * (x[0] - self.x0[0]), k * (x[1] - self.x0[1]));
        let b = bump(self.m, k * (x[0] + self.x0[0]), k * (x[1] + self.x0[1]));
        self.c * (a - b)
    }
}

/// Reference lattice on `[-1, 1]^n` used to validate kernels.
fn reference_points(dim: usize) -> (f64, Vec<Point>) {
    let per_unit: i64 = if dim == 1 { 128 } else { 32 };
    let h = 1.0 / per_unit as f64;
    let ax: Vec<f64> = (-per_unit..=per_unit).map(|i| i as f64 * h).collect();
    let pts = if dim == 1 {
        ax.iter().map(|&x| [x, 0.0]).collect()
    } else {
        ax.iter().flat_map(|&y| ax.iter().map(move |&x| [x, y])).collect()
    };
    (h, pts)
}

/// `max |phi(x) - phi(y)| / |x - y|^beta` over all pairs of the reference lattice.
fn holder_seminorm(values: &[f64], dim: usize, h: f64, beta: f64) -> f64 {
    let side = if dim == 1 { values.len() } else { (values.len() as f64).sqrt().round() as usize };
    let mut best: f64 = 0.0;
    if dim == 1 {
        for d in 1..side {
            let scale = (d as f64 * h).powf(-beta);
            for i in 0..side - d {
                best = best.max((values[i] - values[i + d]).abs() * scale);
            }
        }
        return best;
    }
    let s = side as i64;
    for dy in 0..s {
        for dx in -(s - 1)..s {
            if dy == 0 && dx <= 0 {
                continue;
            }
            let scale = (((dx * dx + dy * dy) as f64).sqrt() * h).powf(-beta);
            for r in 0..s - dy {
                for c in 0.max(-dx)..s.min(s - dx) {
                    let a = values[(r * s + c) as usize];
                    let b = values[((r + dy) * s + c + dx) as usize];
                    best = best.max((a - b).abs() * scale);
                }
            }
        }
    }
    best
}

/// Validation figures of one kernel on the reference lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCheck {
    pub seminorm: f64,
    pub integral: f64,
    pub support_ok: bool,
}

impl KernelCheck {
    pub fn passes(&self) -> bool {
        self.seminorm <= 1.0 && self.integral.abs() <= 1e-8 && self.support_ok
    }
}

/// A finite family of `C_beta` kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelDictionary {
    beta: f64,
    dim: usize,
    seed: u64,
    kernels: Vec<Kernel>,
}

impl KernelDictionary {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    /// The first `size` kernels; equal to `build_dictionary` with the same seed and that size.
    pub fn truncated(&self, size: usize) -> Self {
        Self { kernels: self.kernels[..size.min(self.kernels.len())].to_vec(), ..self.clone() }
    }

    /// Re-validates every kernel on the reference lattice.
    pub fn validate(&self) -> Vec<KernelCheck> {
        self.kernels.iter().map(|k| check_kernel(k, self.dim, self.beta)).collect()
    }

    /// Audit dump: one `kernel_id, x[, y], value` row per reference node.
    pub fn dump_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| HerzError::Param(format!("dictionary dump failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        let header: &[&str] = if self.dim == 1 { &["kernel_id", "x", "value"] } else { &["kernel_id", "x", "y", "value"] };
        w.write_record(header).map_err(io)?;
        let (_, pts) = reference_points(self.dim);
        for (id, k) in self.kernels.iter().enumerate() {
            for p in &pts {
                let mut rec = vec![id.to_string(), format!("{:.16e}", p[0])];
                if self.dim == 2 {
                    rec.push(format!("{:.16e}", p[1]));
                }
                rec.push(format!("{:.16e}", k.eval(*p)));
                w.write_record(&rec).map_err(io)?;
            }
        }
        w.flush().map_err(|e| HerzError::Param(format!("dictionary dump failed: {e}")))?;
        Ok(())
    }
}

fn check_kernel(k: &Kernel, dim: usize, beta: f64) -> KernelCheck {
    let (h, pts) = reference_points(dim);
    let vals: Vec<f64> = pts.iter().map(|&p| k.eval(p)).collect();
    let support_ok = pts.iter().zip(&vals).all(|(p, &v)| p[0] * p[0] + p[1] * p[1] <= 1.0 || v == 0.0);
    KernelCheck {
        seminorm: holder_seminorm(&vals, dim, h, beta),
        integral: vals.iter().sum::<f64>() * h.powi(dim as i32),
        support_ok,
    }
}

/// Seeded antisymmetric bump differences rescaled to sampled Hoelder-`beta` seminorm `0.99`.
///
/// Candidates come from one seeded stream and are kept in order, so a larger `size` extends the
/// dictionary built with a smaller one.
pub fn build_dictionary(beta: f64, size: usize, seed: u64, dim: usize) -> Result<KernelDictionary> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(HerzError::Param(format!("beta = {beta} must lie in (0, 1]")));
    }
    if size == 0 || !(dim == 1 || dim == 2) {
        return Err(HerzError::Param(format!("dictionary size {size} in dimension {dim}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kernels = Vec::with_capacity(size);
    let max_candidates = 8 * size + 16;
    for _ in 0..max_candidates {
        if kernels.len() == size {
            break;
        }
        let m: u32 = rng.gen_range(1..=4);
        let kappa: f64 = rng.gen_range(1.5..6.0);
        let rho: f64 = rng.gen_range(0.3 / kappa..1.0 - 1.0 / kappa);
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let x0 = if dim == 1 { [rho, 0.0] } else { [rho * theta.cos(), rho * theta.sin()] };
        let raw = Kernel { m, kappa, x0, c: 1.0 };
        let s = check_kernel(&raw, dim, beta).seminorm;
        if !(s > 0.0) || !s.is_finite() {
            continue;
        }
        let k = Kernel { c: 0.99 / s, ..raw };
        if check_kernel(&k, dim, beta).passes() {
            kernels.push(k);
        }
    }
    if kernels.len() < size {
        return Err(HerzError::Dictionary { requested: size, survived: kernels.len() });
    }
    Ok(KernelDictionary { beta, dim, seed, kernels })
}

// ---------------------------------------------------------------------------------------------
// Cone quadrature and the square function

/// Levels `t_j = t_min 2^(j/4)` of the `(y, t)` quadrature of the cone `|x - y| < t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeQuadrature {
    levels: Vec<f64>,
    t_min: f64,
    t_max: f64,
}

/// `ln` of the level ratio `2^(1/4)`.
pub const CONE_DLOG: f64 = LN_2 / 4.0;

impl ConeQuadrature {
    /// `t_min = 2h`, `t_max = 2^(k_max+1)`.
    pub fn new(grid: &Grid) -> Self {
        let t_min = 2.0 * grid.spacing();
        let t_max = 2f64.powi(grid.spec().k_max + 1);
        Self::ladder(t_min, t_max)
    }

    /// A ladder over `[t_min, t_max]` within the grid's admissible range.
    pub fn with_range(grid: &Grid, t_min: f64, t_max: f64) -> Result<Self> {
        let full = Self::new(grid);
        if !(t_min >= full.t_min && t_max <= full.t_max && t_min <= t_max) {
            return Err(HerzError::ScaleOutOfRange { t: if t_min < full.t_min { t_min } else { t_max }, min: full.t_min, max: full.t_max });
        }
        Ok(Self::ladder(t_min, t_max))
    }

    fn ladder(t_min: f64, t_max: f64) -> Self {
        let levels = (0..)
            .map(|j: i32| t_min * 2f64.powi(j / 4) * 2f64.powf((j % 4) as f64 / 4.0))
            .take_while(|&t| t <= t_max * (1.0 + 1e-12))
            .collect();
        Self { levels, t_min, t_max }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// The scales the quadrature leaves out.
    pub fn caveat(&self) -> String {
        format!("cone scales t < {} and t > {} are omitted", self.t_min, self.t_max)
    }
}

fn disc_offsets(t: f64, h: f64, dim: usize) -> Vec<(i64, i64)> {
    let m = open_reach(t, h) as i64;
    let mut out = Vec::new();
    if dim == 1 {
        out.extend((-m..=m).map(|dx| (dx, 0)));
    } else {
        for dy in -m..=m {
            for dx in -m..=m {
                if in_ball(((dx * dx + dy * dy) as f64) * h * h, t, true) {
                    out.push((dx, dy));
                }
            }
        }
    }
    out
}

/// Stencil of `phi_t(x) = t^-n phi(x/t)` times the cell `h^n`.
fn kernel_stencil(k: &Kernel, t: f64, h: f64, dim: usize) -> Stencil {
    let offsets = disc_offsets(t, h, dim);
    let scale = (h / t).powi(dim as i32);
    let weights = offsets
        .iter()
        .map(|&(dx, dy)| scale * k.eval([dx as f64 * h / t, dy as f64 * h / t]))
        .collect();
    Stencil { offsets, weights }
}

fn check_scale(t: f64, grid: &Grid) -> Result<()> {
    let full = ConeQuadrature::new(grid);
    if t >= full.t_min * (1.0 - 1e-12) && t <= full.t_max * (1.0 + 1e-12) {
        Ok(())
    } else {
        Err(HerzError::ScaleOutOfRange { t, min: full.t_min, max: full.t_max })
    }
}

/// `A_beta f(y, t) = max_phi |f * phi_t(y)|` over the dictionary, by direct summation.
pub fn a_beta(f: &GridFunction, y: usize, t: f64, dict: &KernelDictionary, grid: &Grid) -> Result<f64> {
    grid.check_same(f.spec())?;
    check_dim(dict, grid)?;
    check_scale(t, grid)?;
    if y >= grid.len() {
        return Err(HerzError::Param(format!("node {y} outside the grid")));
    }
    let n = grid.n_axis() as i64;
    let (col, row) = if grid.dim() == 1 { (y as i64, 0) } else { (y as i64 % n, y as i64 / n) };
    let data = f.samples();
    let mut best: f64 = 0.0;
    for k in dict.kernels() {
        let s = kernel_stencil(k, t, grid.spacing(), grid.dim());
        let mut acc = 0.0;
        for (&(dx, dy), &w) in s.offsets.iter().zip(&s.weights) {
            let (c, r) = (col - dx, row - dy);
            if (0..n).contains(&c) && (grid.dim() == 1 || (0..n).contains(&r)) {
                acc += data[(r * n + c) as usize] * w;
            }
        }
        best = best.max(acc.abs());
    }
    Ok(best)
}

fn check_dim(dict: &KernelDictionary, grid: &Grid) -> Result<()> {
    if dict.dim != grid.dim() {
        return Err(HerzError::Param(format!("{}-d dictionary on a {}-d grid", dict.dim, grid.dim())));
    }
    Ok(())
}

/// Per-level `A_beta f(., t)^2` disc sums already multiplied by `h^n dlog / t^n`.
fn level_contributions(
    f: &GridFunction,
    dict: &KernelDictionary,
    cone: &ConeQuadrature,
    grid: &Grid,
    backend: ConvBackend,
) -> Vec<Vec<f64>> {
    let (dim, n, h) = (grid.dim(), grid.n_axis(), grid.spacing());
    let conv = Convolver::new(f.samples().to_vec(), dim, n, backend);
    cone.levels()
        .par_iter()
        .map(|&t| {
            let stencils: Vec<Stencil> = dict.kernels().iter().map(|k| kernel_stencil(k, t, h, dim)).collect();
            let mut a = vec![0.0f64; grid.len()];
            for pair in stencils.chunks(2) {
                let outs = match pair {
                    [s1, s2] => {
                        let (x, y) = conv.apply_pair(s1, s2);
                        vec![x, y]
                    }
                    [s1] => vec![conv.apply(s1)],
                    _ => unreachable!(),
                };
                for out in outs {
                    for (ai, v) in a.iter_mut().zip(out) {
                        *ai = ai.max(v.abs());
                    }
                }
            }
            let a2: Vec<f64> = a.iter().map(|v| v * v).collect();
            let offsets = disc_offsets(t, h, dim);
            let disc = Stencil { weights: vec![1.0; offsets.len()], offsets };
            let level_weight = h.powi(dim as i32) * CONE_DLOG / t.powi(dim as i32);
            Convolver::new(a2, dim, n, backend).apply(&disc).into_iter().map(|s| s.max(0.0) * level_weight).collect()
        })
        .collect()
}

/// `S f(x) = (sum_j sum_{|x-y| < t_j} A_beta f(y, t_j)^2 h^n dlog / t_j^n)^(1/2)`.
pub fn s_beta(
    f: &GridFunction,
    dict: &KernelDictionary,
    cone: &ConeQuadrature,
    grid: &Grid,
    backend: ConvBackend,
) -> Result<GridFunction> {
    grid.check_same(f.spec())?;
    check_dim(dict, grid)?;
    if cone.levels().iter().any(|&t| check_scale(t, grid).is_err()) {
        return Err(HerzError::ScaleOutOfRange { t: cone.t_max, min: 2.0 * grid.spacing(), max: 2f64.powi(grid.spec().k_max + 1) });
    }
    if f.is_zero() {
        return Ok(GridFunction::zeros(grid));
    }
    let levels = level_contributions(f, dict, cone, grid, backend);
    let mut total = vec![0.0f64; grid.len()];
    for level in &levels {
        for (t, v) in total.iter_mut().zip(level) {
            *t += v;
        }
    }
    Ok(GridFunction::from_raw(grid.spec(), total.into_iter().map(f64::sqrt).collect()))
}
