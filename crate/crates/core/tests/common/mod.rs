//! Independent oracles: plain loops and adaptive quadrature, sharing nothing with the library's
//! fast paths beyond the grid layout and kernel evaluation.
#![allow(dead_code)]

use herzlab::grid::{Grid, Point};
use herzlab::sqfn::KernelDictionary;

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

/// Luxemburg norm by plain bisection on the term-by-term modular, 200 halvings.
pub fn brute_luxemburg(f: &[f64], p: &[f64], w: &[f64], cell: f64) -> f64 {
    let rho = |lam: f64| -> f64 { f.iter().zip(p).zip(w).map(|((&v, &q), &wt)| (v.abs() / lam).powf(q) * wt).sum::<f64>() * cell };
    if f.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (1e-300f64, 1.0f64);
    while rho(hi) > 1.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = if lo <= 1e-300 { hi / 2.0 } else { 0.5 * (lo + hi) };
        if rho(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if lo > 1e-300 && (hi - lo) <= 1e-15 * hi {
            break;
        }
    }
    hi
}

/// `|a - b| < r` with points within a relative 1e-12 of the sphere counted as on it, the way
/// exact arithmetic would place lattice points at distance `2h sqrt 2` from a radius-`2h sqrt 2`
/// center.
fn inside_open(a: Point, b: Point, r: f64) -> bool {
    let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    d2 < r * r * (1.0 - 1e-12)
}

/// Nodes of the open ball `B(c, r)`, by scanning the whole grid.
pub fn brute_ball(grid: &Grid, c: Point, r: f64) -> Vec<usize> {
    (0..grid.len()).filter(|&i| inside_open(grid.point(i), c, r)).collect()
}

/// Centered maximal function: the radius-0 term `|f(x)|` and ball averages over `radii`.
pub fn brute_maximal(f: &[f64], radii: &[f64], grid: &Grid) -> Vec<f64> {
    (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            let mut best = f[i].abs();
            for &r in radii {
                let nodes = brute_ball(grid, x, r);
                let avg = nodes.iter().map(|&j| f[j].abs()).sum::<f64>() / nodes.len() as f64;
                best = best.max(avg);
            }
            best
        })
        .collect()
}

/// `max_phi |sum_z f(z) phi_t(y - z) h^n|` with the kernel evaluated at physical offsets.
pub fn brute_a_beta(f: &[f64], y: usize, t: f64, dict: &KernelDictionary, grid: &Grid) -> f64 {
    let (h, n) = (grid.spacing(), grid.dim() as i32);
    let py = grid.point(y);
    dict.kernels()
        .iter()
        .map(|k| {
            let mut acc = 0.0;
            for z in 0..grid.len() {
                if f[z] == 0.0 {
                    continue;
                }
                let pz = grid.point(z);
                if inside_open(py, pz, t) {
                    acc += f[z] * k.eval([(py[0] - pz[0]) / t, (py[1] - pz[1]) / t]);
                }
            }
            (acc * (h / t).powi(n)).abs()
        })
        .fold(0.0, f64::max)
}

/// `S f(x)^2 = sum_t sum_{|x - y| < t} A(y, t)^2 h^n dlog / t^n` by nested loops at nodes `xs`.
pub fn brute_s_beta(f: &[f64], xs: &[usize], levels: &[f64], dict: &KernelDictionary, grid: &Grid) -> Vec<f64> {
    let (h, n) = (grid.spacing(), grid.dim() as i32);
    let dlog = std::f64::consts::LN_2 / 4.0;
    let mut sums = vec![0.0; xs.len()];
    for &t in levels {
        let a: Vec<f64> = (0..grid.len()).map(|y| brute_a_beta(f, y, t, dict, grid)).collect();
        for (s, &x) in sums.iter_mut().zip(xs) {
            let px = grid.point(x);
            let disc: f64 = (0..grid.len()).filter(|&y| inside_open(px, grid.point(y), t)).map(|y| a[y] * a[y]).sum();
            *s += disc * h.powi(n) * dlog / t.powi(n);
        }
    }
    sums.into_iter().map(f64::sqrt).collect()
}

/// `max_B avg_B w / min_B w` over the given balls.
pub fn brute_a1(w: &[f64], balls: &[(Point, f64)], grid: &Grid) -> f64 {
    balls
        .iter()
        .filter_map(|&(c, r)| {
            let nodes = brute_ball(grid, c, r);
            if nodes.is_empty() {
                return None;
            }
            let avg = nodes.iter().map(|&i| w[i]).sum::<f64>() / nodes.len() as f64;
            let lo = nodes.iter().map(|&i| w[i]).fold(f64::INFINITY, f64::min);
            Some(avg / lo)
        })
        .fold(0.0, f64::max)
}

/// `max_B avg_B w (avg_B w^(-1/(p-1)))^(p-1)`.
pub fn brute_ap(w: &[f64], p0: f64, balls: &[(Point, f64)], grid: &Grid) -> f64 {
    balls
        .iter()
        .filter_map(|&(c, r)| {
            let nodes = brute_ball(grid, c, r);
            if nodes.is_empty() {
                return None;
            }
            let m = nodes.len() as f64;
            let a = nodes.iter().map(|&i| w[i]).sum::<f64>() / m;
            let b = nodes.iter().map(|&i| w[i].powf(-1.0 / (p0 - 1.0))).sum::<f64>() / m;
            Some(a * b.powf(p0 - 1.0))
        })
        .fold(0.0, f64::max)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
