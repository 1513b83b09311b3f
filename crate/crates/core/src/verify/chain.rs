//! The weight-class inclusion chain `A_1 < A_(p_-) < A~_p(.) < A~_q(.) < A_(q_+)` and the
//! `A_p(.)` hypothesis screens.

use serde::Serialize;

use crate::error::{HerzError, Result};
use crate::exponent::{scale, ExponentPreset, VariableExponent};
use crate::grid::{build_grid, GridSpec};
use crate::weights::{
    a1_constant, ap_constant, apvar_constant, atilde_constant, probe_divergence, DivergenceProbe, Weight,
    WeightPreset, DEFAULT_STRIDE,
};

/// Class names in chain order.
pub const CHAIN_CLASSES: [&str; 5] = ["A1", "A_p-", "At_p", "At_q", "A_q+"];

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRow {
    pub weight: String,
    /// One probe per class, in [`CHAIN_CLASSES`] order.
    pub probes: Vec<DivergenceProbe>,
}

impl ChainRow {
    pub fn verdicts(&self) -> Vec<bool> {
        self.probes.iter().map(DivergenceProbe::finite).collect()
    }

    /// Once a class is finite every later class is finite too.
    pub fn monotone(&self) -> bool {
        self.verdicts().windows(2).all(|v| !v[0] || v[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainTable {
    pub rows: Vec<ChainRow>,
}

impl ChainTable {
    pub fn anti_monotone_rows(&self) -> usize {
        self.rows.iter().filter(|r| !r.monotone()).count()
    }

    pub fn passes(&self) -> bool {
        self.anti_monotone_rows() == 0
    }
}

/// Probe settings shared by the chain and the screens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeConfig {
    pub base: GridSpec,
    pub levels: usize,
    pub stride: usize,
}

impl ProbeConfig {
    pub fn new(base: GridSpec, levels: usize) -> Self {
        Self { base, levels, stride: DEFAULT_STRIDE }
    }
}

/// Finiteness verdicts of every zoo weight along the chain for exponents `p <= q`. The constant
/// exponents `p_-` and `q_+` are read off the base grid and held fixed under refinement.
pub fn check_inclusion_chain(
    zoo: &[WeightPreset],
    p: &ExponentPreset,
    q: &ExponentPreset,
    probe: ProbeConfig,
) -> Result<ChainTable> {
    let base = build_grid(probe.base)?;
    let pb = VariableExponent::from_preset(&base, p)?;
    let qb = VariableExponent::from_preset(&base, q)?;
    if pb.values().iter().zip(qb.values()).any(|(a, b)| a > b) {
        return Err(HerzError::Param(format!("chain needs p <= q pointwise: {p} vs {q}")));
    }
    let (p_minus, q_plus) = (pb.p_minus(), qb.p_plus());
    let mut rows = Vec::with_capacity(zoo.len());
    for preset in zoo {
        let run = |class: usize| {
            probe_divergence(probe.base, probe.levels, probe.stride, |grid, family| {
                let w = Weight::from_preset(grid, preset, None)?;
                match class {
                    0 => a1_constant(&w, family, grid),
                    1 => ap_constant(&w, p_minus, family, grid),
                    2 => atilde_constant(&w, &VariableExponent::from_preset(grid, p)?, family, grid),
                    3 => atilde_constant(&w, &VariableExponent::from_preset(grid, q)?, family, grid),
                    _ => ap_constant(&w, q_plus, family, grid),
                }
            })
        };
        let probes = (0..CHAIN_CLASSES.len()).map(run).collect::<Result<Vec<_>>>()?;
        rows.push(ChainRow { weight: preset.to_string(), probes });
    }
    Ok(ChainTable { rows })
}

/// Divergence probe of `[w]_(A_(r p(.)))`: the Herz experiments' weight hypothesis.
pub fn screen_arp(w: &WeightPreset, p: &ExponentPreset, r: f64, probe: ProbeConfig) -> Result<DivergenceProbe> {
    probe_divergence(probe.base, probe.levels, probe.stride, |grid, family| {
        let pv = VariableExponent::from_preset(grid, p)?;
        let weight = Weight::from_preset(grid, w, Some(&pv))?;
        apvar_constant(&weight, &scale(&pv, r)?, family, grid)
    })
}

/// Divergence probe of `[w]_(A_p(.))`: the screen for the `M`-based lemmas.
pub fn screen_apvar(w: &WeightPreset, p: &ExponentPreset, probe: ProbeConfig) -> Result<DivergenceProbe> {
    probe_divergence(probe.base, probe.levels, probe.stride, |grid, family| {
        let pv = VariableExponent::from_preset(grid, p)?;
        let weight = Weight::from_preset(grid, w, Some(&pv))?;
        apvar_constant(&weight, &pv, family, grid)
    })
}
