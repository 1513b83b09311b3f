//! Modulars, Luxemburg norms, associate-space pairings and the two weighted Herz norms.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HerzError, Result};
use crate::exponent::{conjugate, VariableExponent};
use crate::grid::{Grid, GridFunction, GridSpec};
use crate::weights::Weight;

/// Relative bisection tolerance on lambda.
pub const LUX_TOL: f64 = 1e-10;
const LUX_MAX_ITER: usize = 64;
// Final inflation of the upper bracket so that rounding in a caller's own modular evaluation
// cannot push rho(f / norm) above 1.
const LUX_GUARD: f64 = 1e-11;

/// `f`, `p(.)` and an optional weight sharing one grid.
#[derive(Debug, Clone, Copy)]
pub struct ModularQuery<'a> {
    pub f: &'a GridFunction,
    pub p: &'a VariableExponent,
    pub w: Option<&'a Weight>,
}

impl<'a> ModularQuery<'a> {
    pub fn new(f: &'a GridFunction, p: &'a VariableExponent) -> Self {
        Self { f, p, w: None }
    }

    pub fn weighted(f: &'a GridFunction, p: &'a VariableExponent, w: &'a Weight) -> Self {
        Self { f, p, w: Some(w) }
    }

    fn check(&self) -> Result<GridSpec> {
        let spec = self.f.spec();
        if self.p.spec() != spec || self.w.is_some_and(|w| w.spec() != spec) {
            return Err(HerzError::GridMismatch);
        }
        Ok(spec)
    }

    fn weight_at(&self, i: usize) -> f64 {
        self.w.map_or(1.0, |w| w.values()[i])
    }
}

pub(crate) fn cell_of(spec: GridSpec) -> f64 {
    spec.spacing().powi(spec.dim as i32)
}

/// `int |f / lambda|^p(x) w(x) dx` by the midpoint rule.
pub fn modular(query: &ModularQuery, lambda: f64) -> Result<f64> {
    let spec = query.check()?;
    if !(lambda > 0.0) {
        return Err(HerzError::Param(format!("lambda = {lambda} must be positive")));
    }
    let f = query.f.samples();
    let p = query.p.values();
    let sum: f64 = (0..f.len())
        .filter(|&i| f[i] != 0.0)
        .map(|i| (f[i].abs() / lambda).powf(p[i]) * query.weight_at(i))
        .sum();
    Ok(sum * cell_of(spec))
}

/// `inf { lambda > 0 : rho(f / lambda) <= 1 }`.
pub fn luxemburg_norm(query: &ModularQuery) -> Result<f64> {
    let spec = query.check()?;
    let f = query.f.samples();
    let p = query.p.values();
    Ok(luxemburg_raw((0..f.len()).map(|i| (f[i], p[i], query.weight_at(i))), cell_of(spec)))
}

/// `||f w^(1/p)||_p`, evaluated through the weighted modular.
pub fn weighted_norm(f: &GridFunction, p: &VariableExponent, w: &Weight) -> Result<f64> {
    luxemburg_norm(&ModularQuery::weighted(f, p, w))
}

/// `||g w^(-1/p)||_{p'}`: the norm of the associate space of `L^p(.)(w)`.
pub fn associate_norm(g: &GridFunction, p: &VariableExponent, w: &Weight) -> Result<f64> {
    ModularQuery::weighted(g, p, w).check()?;
    let pc = conjugate(p);
    let (gs, ps, ws, pcs) = (g.samples(), p.values(), w.values(), pc.values());
    Ok(luxemburg_raw(
        (0..gs.len()).map(|i| (gs[i] * ws[i].powf(-1.0 / ps[i]), pcs[i], 1.0)),
        cell_of(g.spec()),
    ))
}

/// `int f g`.
pub fn pairing(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    if f.spec() != g.spec() {
        return Err(HerzError::GridMismatch);
    }
    let s: f64 = f.samples().iter().zip(g.samples()).map(|(a, b)| a * b).sum();
    Ok(s * cell_of(f.spec()))
}

/// Luxemburg norm of the terms `(f_i, p_i, w_i)`, each carrying mass `cell`.
///
/// Exponents may be any positive reals. Samples are normalized by `max |f|`, nodes are grouped by
/// exponent so that `rho(mu) = cell * sum_g S_g mu^(-p_g)` costs one power per group, and the
/// root is bracketed by doubling/halving and then bisected.
pub(crate) fn luxemburg_raw(terms: impl Iterator<Item = (f64, f64, f64)> + Clone, cell: f64) -> f64 {
    let fmax = terms.clone().fold(0.0f64, |m, (f, _, _)| m.max(f.abs()));
    if fmax == 0.0 {
        return 0.0;
    }
    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let mut last: Option<(u64, usize)> = None;
    for (f, p, w) in terms {
        if f == 0.0 {
            continue;
        }
        let key = p.to_bits();
        let slot = match last {
            Some((k, s)) if k == key => s,
            _ => {
                let s = *index.entry(key).or_insert_with(|| {
                    groups.push((p, 0.0));
                    groups.len() - 1
                });
                last = Some((key, s));
                s
            }
        };
        groups[slot].1 += (f.abs() / fmax).powf(p) * w;
    }
    let rho = |mu: f64| -> f64 {
        let lm = mu.ln();
        groups.iter().map(|&(p, s)| s * (-p * lm).exp()).sum::<f64>() * cell
    };

    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    if rho(1.0) > 1.0 {
        while rho(hi) > 1.0 {
            lo = hi;
            hi *= 2.0;
        }
    } else {
        while rho(lo) <= 1.0 {
            hi = lo;
            lo *= 0.5;
        }
    }
    for _ in 0..LUX_MAX_ITER {
        if hi - lo <= LUX_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if rho(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    fmax * hi * (1.0 + LUX_GUARD)
}

/// Parameters of the weighted Herz spaces and the main theorem's admissibility window.
#[derive(Debug, Clone)]
pub struct HerzParams {
    pub alpha: f64,
    pub q: f64,
    pub p: VariableExponent,
    pub w: Weight,
    pub r: f64,
    pub delta: f64,
}

impl HerzParams {
    pub fn new(alpha: f64, q: f64, p: VariableExponent, w: Weight, r: f64, delta: f64) -> Result<Self> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(HerzError::Param(format!("q = {q} must lie in (0, inf)")));
        }
        if !alpha.is_finite() || !(r > 0.0) || !(delta > 0.0) {
            return Err(HerzError::Param(format!("alpha = {alpha}, r = {r}, delta = {delta}")));
        }
        if p.spec() != w.spec() {
            return Err(HerzError::GridMismatch);
        }
        Ok(Self { alpha, q, p, w, r, delta })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HerzNorm {
    pub value: f64,
    /// `(k, ||f chi_k||_{L^p(.)(w)})` for every shell in the sum.
    pub shell_norms: Vec<(i32, f64)>,
    /// Share of `sum_k 2^(alpha k q) ||f chi_k||^q` carried by the innermost and outermost shells.
    pub boundary_fraction: f64,
}

/// Node lists per dyadic shell: `D_k` for `k_min..=k_max`, or `C_m` for `0..=k_max`.
pub(crate) fn shell_nodes(grid: &Grid, homogeneous: bool) -> Vec<(i32, Vec<usize>)> {
    let spec = grid.spec();
    let (first, last) = if homogeneous { (spec.k_min, spec.k_max) } else { (0, spec.k_max.max(0)) };
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); (last - first + 1) as usize];
    for i in 0..grid.len() {
        let mut k = grid.shell_of(i);
        if !homogeneous && k < 0 {
            k = 0;
        }
        if k >= first && k <= last {
            buckets[(k - first) as usize].push(i);
        }
    }
    buckets.into_iter().enumerate().map(|(j, b)| (first + j as i32, b)).collect()
}

/// `L^p(.)(w)` norm of `f` restricted to `nodes`.
pub(crate) fn norm_on(f: &[f64], p: &[f64], w: &[f64], nodes: &[usize], cell: f64) -> f64 {
    luxemburg_raw(nodes.iter().map(|&i| (f[i], p[i], w[i])), cell)
}

/// `(sum_k 2^(alpha k q) ||f chi_k||^q)^(1/q)` over the grid's shells (`C_m` pieces when not
/// homogeneous). For `q < 1` this is a quasi-norm.
pub fn herz_norm(f: &GridFunction, params: &HerzParams, homogeneous: bool, grid: &Grid) -> Result<HerzNorm> {
    grid.check_same(f.spec())?;
    grid.check_same(params.p.spec())?;
    let shells = shell_nodes(grid, homogeneous);
    let shell_norms: Vec<(i32, f64)> = shells
        .iter()
        .map(|(k, nodes)| {
            (*k, norm_on(f.samples(), params.p.values(), params.w.values(), nodes, grid.cell()))
        })
        .collect();
    Ok(herz_from_shells(shell_norms, params.alpha, params.q))
}

pub(crate) fn herz_from_shells(shell_norms: Vec<(i32, f64)>, alpha: f64, q: f64) -> HerzNorm {
    let terms: Vec<f64> =
        shell_norms.iter().map(|&(k, v)| (2f64.powf(alpha * k as f64) * v).powf(q)).collect();
    let total: f64 = terms.iter().sum();
    let boundary = match terms.len() {
        0 => 0.0,
        1 => terms[0],
        n => terms[0] + terms[n - 1],
    };
    HerzNorm {
        value: total.powf(1.0 / q),
        shell_norms,
        boundary_fraction: if total > 0.0 { boundary / total } else { 0.0 },
    }
}

/// Lower estimate of the associate norm of `f`: the largest `|int f g|` over seeded trial `g`
/// normalized in `L^p(.)(w)`. The first trial is the Hoelder extremizer, so a budget of 1 already
/// attains `||f||_2` when `p = 2` and `w = 1`.
pub fn dual_norm_estimate(
    f: &GridFunction,
    p: &VariableExponent,
    w: &Weight,
    trial_budget: usize,
    seed: u64,
) -> Result<f64> {
    ModularQuery::weighted(f, p, w).check()?;
    if f.is_zero() || trial_budget == 0 {
        return Ok(0.0);
    }
    let pc = conjugate(p);
    let (fs, ps, ws) = (f.samples(), p.values(), w.values());
    // F = f W^(-1) with W = w^(1/p); the extremizer is g = sgn F |F / ||F||_{p'}|^(p'-1) / W.
    let big_f: Vec<f64> = (0..fs.len()).map(|i| fs[i] * ws[i].powf(-1.0 / ps[i])).collect();
    let lam = luxemburg_raw((0..fs.len()).map(|i| (big_f[i], pc.at(i), 1.0)), cell_of(f.spec()));
    let extremal: Vec<f64> = (0..fs.len())
        .map(|i| {
            let a = big_f[i] / lam;
            a.signum() * a.abs().powf(pc.at(i) - 1.0) * ws[i].powf(-1.0 / ps[i])
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for trial in 0..trial_budget {
        let samples: Vec<f64> = if trial == 0 {
            extremal.clone()
        } else if trial % 2 == 1 {
            extremal.iter().map(|&e| e * (1.0 + 0.5 * rng.gen_range(-1.0..1.0))).collect()
        } else {
            (0..fs.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let g = GridFunction::from_raw(f.spec(), samples);
        let norm = weighted_norm(&g, p, w)?;
        if norm > 0.0 {
            best = best.max(pairing(f, &g)?.abs() / norm);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec, Region};

    fn grid() -> Grid {
        build_grid(GridSpec::new(1, -2, 3, 64)).unwrap()
    }

    #[test]
    fn modular_examples() {
        let g = grid();
        let f = GridFunction::indicator(&g, &Region::dyadic_ball(0)).unwrap();
        let p2 = VariableExponent::constant(&g, 2.0).unwrap();
        let q = ModularQuery::new(&f, &p2);
        assert!((modular(&q, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((modular(&q, 2f64.sqrt()).unwrap() - 1.0).abs() < 1e-12);
        let ramp = VariableExponent::from_fn(&g, |x| 2.0 + x[0].abs().min(1.0)).unwrap();
        assert!((modular(&ModularQuery::new(&f, &ramp), 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(modular(&q, 0.0).is_err());
    }

    #[test]
    fn luxemburg_examples() {
        let g = grid();
        let f = GridFunction::indicator(&g, &Region::dyadic_ball(0)).unwrap();
        let p2 = VariableExponent::constant(&g, 2.0).unwrap();
        let n = luxemburg_norm(&ModularQuery::new(&f, &p2)).unwrap();
        assert!((n / 2f64.sqrt() - 1.0).abs() < 1e-9);
        let z = GridFunction::zeros(&g);
        assert_eq!(luxemburg_norm(&ModularQuery::new(&z, &p2)).unwrap(), 0.0);
    }

    #[test]
    fn sub_unit_exponents() {
        // ||chi_B||_{1/2} = |B|^2
        let g = grid();
        let f = GridFunction::indicator(&g, &Region::dyadic_ball(1)).unwrap();
        let half = VariableExponent::constant(&g, 3.0).unwrap();
        let vals: Vec<f64> = half.values().iter().map(|_| 0.5).collect();
        let n = luxemburg_raw(
            f.samples().iter().zip(&vals).map(|(&a, &p)| (a, p, 1.0)),
            g.cell(),
        );
        assert!((n / 16.0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn power_of_two_scaling_is_exact() {
        let g = grid();
        let f = GridFunction::from_fn(&g, |x| (x[0] * 0.7).sin()).unwrap();
        let p = VariableExponent::from_fn(&g, |x| 2.0 + x[0].abs().min(1.0)).unwrap();
        let a = luxemburg_norm(&ModularQuery::new(&f, &p)).unwrap();
        let f4 = f.scaled(4.0);
        assert_eq!(luxemburg_norm(&ModularQuery::new(&f4, &p)).unwrap(), 4.0 * a);
    }

    #[test]
    fn pairing_basics() {
        let g = grid();
        let f = GridFunction::indicator(&g, &Region::dyadic_ball(0)).unwrap();
        assert_eq!(pairing(&f, &f).unwrap(), 2.0);
        let other = GridFunction::indicator(&g, &Region::Shell(3)).unwrap();
        assert_eq!(pairing(&f, &other).unwrap(), 0.0);
    }

    #[test]
    fn dual_estimate_first_trial_is_extremal() {
        let g = grid();
        let f = GridFunction::indicator(&g, &Region::dyadic_ball(0)).unwrap();
        let p2 = VariableExponent::constant(&g, 2.0).unwrap();
        let w = Weight::unit(&g);
        let est = dual_norm_estimate(&f, &p2, &w, 1, 3).unwrap();
        assert!((est / 2f64.sqrt() - 1.0).abs() < 1e-8);
        let more = dual_norm_estimate(&f, &p2, &w, 16, 3).unwrap();
        assert!(more >= est && more <= 2.0 * associate_norm(&f, &p2, &w).unwrap());
        let z = GridFunction::zeros(&g);
        assert_eq!(dual_norm_estimate(&z, &p2, &w, 8, 3).unwrap(), 0.0);
    }

    #[test]
    fn herz_examples() {
        let g = grid();
        let p2 = VariableExponent::constant(&g, 2.0).unwrap();
        let w = Weight::unit(&g);
        let params = HerzParams::new(0.0, 1.0, p2.clone(), w.clone(), 0.75, 0.5).unwrap();
        let f = GridFunction::indicator(&g, &Region::Shell(3)).unwrap();
        let h = herz_norm(&f, &params, true, &g).unwrap();
        assert!((h.value / 8f64.sqrt() - 1.0).abs() < 1e-9);

        let b0 = GridFunction::indicator(&g, &Region::dyadic_ball(0)).unwrap();
        let params = HerzParams::new(1.0, 1.0, p2, w, 0.75, 0.5).unwrap();
        let h = herz_norm(&b0, &params, false, &g).unwrap();
        assert!((h.value / 2f64.sqrt() - 1.0).abs() < 1e-9);
        assert_eq!(h.shell_norms.len(), 4);
    }

    #[test]
    fn herz_rejects_bad_q() {
        let g = grid();
        let p2 = VariableExponent::constant(&g, 2.0).unwrap();
        let w = Weight::unit(&g);
        assert!(HerzParams::new(0.0, 0.0, p2.clone(), w.clone(), 0.75, 0.5).is_err());
        assert!(HerzParams::new(0.0, -1.0, p2, w, 0.75, 0.5).is_err());
    }
}
