//! Operator-ratio experiments on `L^p(.)(w)` and the Herz spaces, and the main theorem's
//! three-term decomposition.

use std::collections::HashMap;

use serde::Serialize;

use crate::conv::ConvBackend;
use crate::error::{HerzError, Result};
use crate::exponent::{ExponentPreset, VariableExponent};
use crate::grid::{build_grid, Grid, GridFunction, GridSpec};
use crate::norms::{herz_from_shells, herz_norm, norm_on, shell_nodes, weighted_norm, HerzParams};
use crate::sqfn::{build_dictionary, maximal, s_beta, ConeQuadrature, KernelDictionary};
use crate::verify::lemmas::{dyadic_ball_measure, window, WindowDecision};
use crate::verify::suite::SuiteEntry;
use crate::weights::{radius_ladder, Weight, WeightPreset};

/// Refinement growth allowed for a bounded operator.
pub const MAX_REFINEMENT_GROWTH: f64 = 1.10;

/// Exponent and weight recipes, rebuilt on every grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub p: ExponentPreset,
    pub w: WeightPreset,
    pub p_infinity: Option<f64>,
}

impl Setting {
    pub fn new(p: ExponentPreset, w: WeightPreset) -> Self {
        Self { p, w, p_infinity: None }
    }

    pub fn build(&self, grid: &Grid) -> Result<(VariableExponent, Weight)> {
        let mut p = VariableExponent::from_preset(grid, &self.p)?;
        if let Some(pi) = self.p_infinity {
            p = p.with_p_infinity(pi);
        }
        let w = Weight::from_preset(grid, &self.w, Some(&p))?;
        Ok((p, w))
    }
}

/// Dictionary and quadrature options of the computable square function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SquareConfig {
    pub beta: f64,
    pub dict_size: usize,
    pub dict_seed: u64,
    pub backend: ConvBackend,
}

impl SquareConfig {
    pub fn dictionary(&self, dim: usize) -> Result<KernelDictionary> {
        build_dictionary(self.beta, self.dict_size, self.dict_seed, dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Maximal,
    SBeta(SquareConfig),
}

impl Operator {
    pub fn id(&self) -> &'static str {
        match self {
            Operator::Maximal => "maximal",
            Operator::SBeta(_) => "s_beta",
        }
    }

    fn dict_size(&self) -> usize {
        match self {
            Operator::Maximal => 0,
            Operator::SBeta(c) => c.dict_size,
        }
    }
}

/// Applies an operator on one grid, reusing the dictionary across calls.
pub struct Applier {
    op: Operator,
    dict: Option<KernelDictionary>,
}

impl Applier {
    pub fn new(op: &Operator, dim: usize) -> Result<Self> {
        let dict = match op {
            Operator::Maximal => None,
            Operator::SBeta(cfg) => Some(cfg.dictionary(dim)?),
        };
        Ok(Self { op: op.clone(), dict })
    }

    pub fn apply(&self, f: &GridFunction, grid: &Grid) -> Result<GridFunction> {
        match (&self.op, &self.dict) {
            (Operator::Maximal, _) => maximal(f, &radius_ladder(grid), grid),
            (Operator::SBeta(cfg), Some(d)) => s_beta(f, d, &ConeQuadrature::new(grid), grid, cfg.backend),
            _ => unreachable!("square function without dictionary"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub function_id: String,
    pub resolution: u32,
    pub dict_size: usize,
    pub input_norm: f64,
    pub output_norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub rows: Vec<RatioRow>,
    pub max_ratio: f64,
    /// `(points_per_unit, max ratio)` per resolution.
    pub max_by_resolution: Vec<(u32, f64)>,
    /// Max ratio at the finest resolution over the max at the one before.
    pub refinement_growth: f64,
    /// Functions skipped for a zero input norm.
    pub skipped: Vec<String>,
    pub probe: bool,
    /// In probe mode: whether the max ratio is nondecreasing under refinement.
    pub monotone_trend: bool,
}

impl RatioReport {
    /// Finite ratios and refinement growth at most [`MAX_REFINEMENT_GROWTH`]; probes always pass.
    pub fn passes(&self) -> bool {
        self.probe || (self.max_ratio.is_finite() && self.refinement_growth <= MAX_REFINEMENT_GROWTH)
    }

    fn from_rows(rows: Vec<RatioRow>, resolutions: &[u32], skipped: Vec<String>, probe: bool) -> Self {
        let max_by_resolution: Vec<(u32, f64)> = resolutions
            .iter()
            .map(|&res| (res, rows.iter().filter(|r| r.resolution == res).map(|r| r.ratio).fold(0.0, f64::max)))
            .collect();
        let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
        let refinement_growth = match max_by_resolution.as_slice() {
            [.., (_, a), (_, b)] => b / a,
            _ => f64::NAN,
        };
        let monotone_trend = max_by_resolution.windows(2).all(|w| w[1].1 >= w[0].1);
        Self { rows, max_ratio, max_by_resolution, refinement_growth, skipped, probe, monotone_trend }
    }
}

fn resolution_specs(base: GridSpec, resolutions: usize) -> Result<Vec<GridSpec>> {
    if resolutions < 2 {
        return Err(HerzError::Param("ratio experiments need at least two resolutions".into()));
    }
    Ok(std::iter::successors(Some(base), |s| Some(s.refined())).take(resolutions).collect())
}

/// `||Op f||_{L^p(.)(w)} / ||f||_{L^p(.)(w)}` over the suite at `resolutions` successive doublings
/// of `base`.
pub fn lp_boundedness_ratio(
    op: &Operator,
    setting: &Setting,
    suite: &[SuiteEntry],
    base: GridSpec,
    resolutions: usize,
) -> Result<RatioReport> {
    let specs = resolution_specs(base, resolutions)?;
    let applier = Applier::new(op, base.dim)?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for spec in &specs {
        let grid = build_grid(*spec)?;
        let (p, w) = setting.build(&grid)?;
        for entry in suite {
            let f = entry.f.sample(&grid)?;
            let input = weighted_norm(&f, &p, &w)?;
            if input == 0.0 {
                skipped.push(format!("{} at {}", entry.id, spec.points_per_unit));
                continue;
            }
            let output = weighted_norm(&applier.apply(&f, &grid)?, &p, &w)?;
            rows.push(RatioRow {
                function_id: entry.id.clone(),
                resolution: spec.points_per_unit,
                dict_size: op.dict_size(),
                input_norm: input,
                output_norm: output,
                ratio: output / input,
            });
        }
    }
    let res: Vec<u32> = specs.iter().map(|s| s.points_per_unit).collect();
    Ok(RatioReport::from_rows(rows, &res, skipped, false))
}

/// Herz-space parameters as recipes.
#[derive(Debug, Clone, PartialEq)]
pub struct HerzSetting {
    pub alpha: f64,
    pub q: f64,
    pub r: f64,
    pub delta: f64,
    pub setting: Setting,
}

impl HerzSetting {
    pub fn params(&self, grid: &Grid) -> Result<HerzParams> {
        let (p, w) = self.setting.build(grid)?;
        HerzParams::new(self.alpha, self.q, p, w, self.r, self.delta)
    }

    pub fn window(&self, grid: &Grid) -> Result<WindowDecision> {
        let p = VariableExponent::from_preset(grid, &self.setting.p)?;
        Ok(window(self.alpha, self.r, self.delta, p.p_minus(), grid.dim()))
    }
}

/// `||S f||_K / ||f||_K` over the suite at successive resolutions. Outside the admissibility
/// window this is an error unless `probe` is set, in which case ratios are recorded and never fail.
pub fn herz_boundedness_ratio(
    herz: &HerzSetting,
    sq: &SquareConfig,
    suite: &[SuiteEntry],
    base: GridSpec,
    resolutions: usize,
    homogeneous: bool,
    probe: bool,
) -> Result<RatioReport> {
    let specs = resolution_specs(base, resolutions)?;
    let decision = herz.window(&build_grid(base)?)?;
    if !decision.accept && !probe {
        return Err(HerzError::WindowRejected(decision.reasons().join("; ")));
    }
    let dict = sq.dictionary(base.dim)?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for spec in &specs {
        let grid = build_grid(*spec)?;
        let params = herz.params(&grid)?;
        let cone = ConeQuadrature::new(&grid);
        for entry in suite {
            let f = entry.f.sample(&grid)?;
            let input = herz_norm(&f, &params, homogeneous, &grid)?.value;
            if input == 0.0 {
                skipped.push(format!("{} at {}", entry.id, spec.points_per_unit));
                continue;
            }
            let sf = s_beta(&f, &dict, &cone, &grid, sq.backend)?;
            let output = herz_norm(&sf, &params, homogeneous, &grid)?.value;
            rows.push(RatioRow {
                function_id: entry.id.clone(),
                resolution: spec.points_per_unit,
                dict_size: dict.len(),
                input_norm: input,
                output_norm: output,
                ratio: output / input,
            });
        }
    }
    let res: Vec<u32> = specs.iter().map(|s| s.points_per_unit).collect();
    Ok(RatioReport::from_rows(rows, &res, skipped, probe || !decision.accept))
}

/// Which half of the main theorem's proof a Herz exponent `q` exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QBranch {
    /// `0 < q <= 1`: the `q`-triangle inequality for sums.
    QuasiTriangle,
    /// `1 < q < inf`: the auxiliary Hoelder split.
    HolderSplit,
}

impl QBranch {
    pub fn of(q: f64) -> Self {
        if q <= 1.0 {
            QBranch::QuasiTriangle
        } else {
            QBranch::HolderSplit
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// `T_1`, `T_2`, `T_3`: the near-diagonal, low-shell and high-shell sums.
    pub t: [f64; 3],
    /// `||S f||_K` for `f` restricted to the shell range.
    pub herz_sf: f64,
    /// `||f||_K`.
    pub herz_f: f64,
    /// `3^max(0, 1/q - 1)`: the quasi-triangle factor in `||S f||_K <= factor (T_1 + T_2 + T_3)`.
    pub quasi_factor: f64,
    pub branch: QBranch,
}

impl Decomposition {
    /// `||S f||_K <= factor (T_1 + T_2 + T_3)` up to a relative rounding slack of `1e-9`.
    pub fn sanity_holds(&self) -> bool {
        self.herz_sf <= self.quasi_factor * (self.t[0] + self.t[1] + self.t[2]) * (1.0 + 1e-9)
    }
}

/// Shells `l` of `f` grouped by the proof's split relative to `k`: `|l - k| <= 1`, `l <= k - 2`,
/// `l >= k + 2`.
fn split_ranges(k: i32) -> [(i32, i32); 3] {
    [(k - 1, k + 1), (i32::MIN, k - 2), (k + 2, i32::MAX)]
}

/// `T_1`, `T_2`, `T_3` exactly as in the proof: for each shell `k`, the `L^p(.)(w)` norm on `D_k`
/// of `S` applied to the part of `f` in the corresponding shell group, summed with weights
/// `2^(alpha k q)` in `l^q`.
pub fn decomposition_diagnostic(
    f: &GridFunction,
    params: &HerzParams,
    dict: &KernelDictionary,
    backend: ConvBackend,
    grid: &Grid,
    homogeneous: bool,
) -> Result<Decomposition> {
    grid.check_same(f.spec())?;
    let shells = shell_nodes(grid, homogeneous);
    let cone = ConeQuadrature::new(grid);
    let (ps, ws, cell) = (params.p.values(), params.w.values(), grid.cell());
    let occupied: Vec<i32> =
        shells.iter().filter(|(_, nodes)| nodes.iter().any(|&i| f.samples()[i] != 0.0)).map(|(k, _)| *k).collect();
    let shell_index: HashMap<i32, &Vec<usize>> = shells.iter().map(|(k, n)| (*k, n)).collect();

    let mut cache: HashMap<Vec<i32>, Option<GridFunction>> = HashMap::new();
    let mut s_of = |group: Vec<i32>| -> Result<Option<GridFunction>> {
        if let Some(v) = cache.get(&group) {
            return Ok(v.clone());
        }
        let out = if group.is_empty() {
            None
        } else {
            let mut piece = vec![0.0; grid.len()];
            for k in &group {
                for &i in shell_index[k] {
                    piece[i] = f.samples()[i];
                }
            }
            Some(s_beta(&GridFunction::from_raw(grid.spec(), piece), dict, &cone, grid, backend)?)
        };
        cache.insert(group, out.clone());
        Ok(out)
    };

    let mut per_term: [Vec<(i32, f64)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (k, nodes) in &shells {
        for (i, (lo, hi)) in split_ranges(*k).into_iter().enumerate() {
            let group: Vec<i32> = occupied.iter().copied().filter(|l| *l >= lo && *l <= hi).collect();
            let v = match s_of(group)? {
                Some(s) => norm_on(s.samples(), ps, ws, nodes, cell),
                None => 0.0,
            };
            per_term[i].push((*k, v));
        }
    }
    let t = per_term.map(|terms| herz_from_shells(terms, params.alpha, params.q).value);
    let full = s_of(occupied.clone())?;
    let herz_sf = match &full {
        Some(s) => herz_norm(s, params, homogeneous, grid)?.value,
        None => 0.0,
    };
    let herz_f = herz_norm(f, params, homogeneous, grid)?.value;
    Ok(Decomposition {
        t,
        herz_sf,
        herz_f,
        quasi_factor: 3f64.powf((1.0 / params.q - 1.0).max(0.0)),
        branch: QBranch::of(params.q),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionRow {
    pub function_id: String,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub herz_sf: f64,
    pub herz_f: f64,
    pub sanity: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub rows: Vec<DecompositionRow>,
    /// `max_f T_i / ||f||_K` for `i = 1, 2, 3`.
    pub constants: [f64; 3],
    pub sanity_violations: usize,
    pub branch: QBranch,
}

impl DecompositionReport {
    pub fn passes(&self) -> bool {
        self.sanity_violations == 0 && self.constants.iter().all(|c| c.is_finite())
    }
}

/// Runs [`decomposition_diagnostic`] over a suite on one grid.
pub fn decomposition_sweep(
    herz: &HerzSetting,
    sq: &SquareConfig,
    suite: &[SuiteEntry],
    spec: GridSpec,
    homogeneous: bool,
) -> Result<DecompositionReport> {
    let grid = build_grid(spec)?;
    let params = herz.params(&grid)?;
    let dict = sq.dictionary(spec.dim)?;
    let mut rows = Vec::new();
    let mut constants = [0.0f64; 3];
    for entry in suite {
        let f = entry.f.sample(&grid)?;
        let d = decomposition_diagnostic(&f, &params, &dict, sq.backend, &grid, homogeneous)?;
        if d.herz_f > 0.0 {
            for i in 0..3 {
                constants[i] = constants[i].max(d.t[i] / d.herz_f);
            }
        }
        rows.push(DecompositionRow {
            function_id: entry.id.clone(),
            t1: d.t[0],
            t2: d.t[1],
            t3: d.t[2],
            herz_sf: d.herz_sf,
            herz_f: d.herz_f,
            sanity: d.sanity_holds(),
        });
    }
    let sanity_violations = rows.iter().filter(|r| !r.sanity).count();
    Ok(DecompositionReport { rows, constants, sanity_violations, branch: QBranch::of(herz.q) })
}

/// Smallest `C` with `S chi_(D_l)(x) <= C (|B_l| / |B_k|) ||chi_(D_l)|| / ||chi_(B_l)||` for all
/// shells `l <= k - 2` and nodes `x` in `D_k`.
pub fn far_shell_constant(setting: &Setting, sq: &SquareConfig, spec: GridSpec) -> Result<f64> {
    let grid = build_grid(spec)?;
    let (p, w) = setting.build(&grid)?;
    let dict = sq.dictionary(spec.dim)?;
    let cone = ConeQuadrature::new(&grid);
    let shells = shell_nodes(&grid, true);
    let ones = vec![1.0; grid.len()];
    let mut c: f64 = 0.0;
    for (l, l_nodes) in &shells {
        if *l > spec.k_max - 2 {
            continue;
        }
        let mut fl = vec![0.0; grid.len()];
        for &i in l_nodes {
            fl[i] = 1.0;
        }
        let sf = s_beta(&GridFunction::from_raw(spec, fl), &dict, &cone, &grid, sq.backend)?;
        let shell_norm = norm_on(&ones, p.values(), w.values(), l_nodes, grid.cell());
        let ball_nodes = crate::grid::Region::dyadic_ball(*l).nodes(&grid)?;
        let ball_norm = norm_on(&ones, p.values(), w.values(), &ball_nodes, grid.cell());
        let b_l = dyadic_ball_measure(*l, &grid)?;
        for (k, k_nodes) in &shells {
            if *k < l + 2 {
                continue;
            }
            let rhs = b_l / dyadic_ball_measure(*k, &grid)? * shell_norm / ball_norm;
            for &i in k_nodes {
                c = c.max(sf.samples()[i] / rhs);
            }
        }
    }
    Ok(c)
}
