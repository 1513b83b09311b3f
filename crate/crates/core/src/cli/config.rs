//! Experiment configuration: JSON, unknown keys rejected, seed mandatory.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::conv::ConvBackend;
use crate::exponent::ExponentPreset;
use crate::grid::GridSpec;
use crate::verify::SuiteFamily;
use crate::weights::WeightPreset;

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Lemma1,
    Lemma2,
    MeasureComparison,
    NormGrowth,
    InclusionChain,
    LpRatio,
    HerzRatio,
    Decomposition,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Lemma1 => "lemma1",
            ExperimentKind::Lemma2 => "lemma2",
            ExperimentKind::MeasureComparison => "measure_comparison",
            ExperimentKind::NormGrowth => "norm_growth",
            ExperimentKind::InclusionChain => "inclusion_chain",
            ExperimentKind::LpRatio => "lp_ratio",
            ExperimentKind::HerzRatio => "herz_ratio",
            ExperimentKind::Decomposition => "decomposition",
        }
    }

    fn needs_herz(self) -> bool {
        matches!(self, ExperimentKind::HerzRatio | ExperimentKind::Decomposition)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorName {
    Maximal,
    SBeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HerzSection {
    pub alpha: f64,
    pub q: f64,
    pub r: f64,
    /// Norm-growth exponent; fitted on the experiment grid when absent.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "yes")]
    pub homogeneous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SquareSection {
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "default_dict_size")]
    pub dict_size: usize,
    #[serde(default)]
    pub backend: ConvBackend,
}

impl Default for SquareSection {
    fn default() -> Self {
        Self { beta: 1.0, dict_size: default_dict_size(), backend: ConvBackend::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSection {
    #[serde(default = "all_families")]
    pub families: Vec<SuiteFamily>,
    #[serde(default = "default_suite_count")]
    pub count: usize,
    /// Defaults to a value derived from the run seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for SuiteSection {
    fn default() -> Self {
        Self { families: all_families(), count: default_suite_count(), seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub zoo: Vec<String>,
    pub q_exponent: String,
    #[serde(default = "default_probe_ppu")]
    pub points_per_unit: u32,
    #[serde(default = "default_levels")]
    pub levels: usize,
}

/// Coarse divergence probes guarding the lemma and Herz experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_probe_ppu")]
    pub points_per_unit: u32,
    #[serde(default = "default_levels")]
    pub levels: usize,
}

impl Default for ScreenSection {
    fn default() -> Self {
        Self { enabled: true, points_per_unit: default_probe_ppu(), levels: default_levels() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub grid: GridSpec,
    pub exponent: String,
    pub weight: String,
    #[serde(default)]
    pub p_infinity: Option<f64>,
    pub experiments: Vec<ExperimentKind>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub herz: Option<HerzSection>,
    #[serde(default)]
    pub square: SquareSection,
    #[serde(default)]
    pub suite: SuiteSection,
    #[serde(default)]
    pub chain: Option<ChainSection>,
    #[serde(default)]
    pub screen: ScreenSection,
    #[serde(default = "default_operators")]
    pub operators: Vec<OperatorName>,
    /// Ball pairs for the lemma and measure-comparison fits.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Resolution doublings for the ratio experiments, counting the base grid.
    #[serde(default = "default_resolutions")]
    pub resolutions: usize,
    #[serde(default)]
    pub probe: bool,
}

/// Parsed presets, checked once up front.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub exponent: ExponentPreset,
    pub weight: WeightPreset,
    pub zoo: Vec<WeightPreset>,
    pub q_exponent: Option<ExponentPreset>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<Resolved, CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.grid.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.experiments.is_empty() {
            return bad("experiment list is empty".into());
        }
        let preset_err = |e: crate::HerzError| CliError::Config(e.to_string());
        let exponent: ExponentPreset = self.exponent.parse().map_err(preset_err)?;
        let weight: WeightPreset = self.weight.parse().map_err(preset_err)?;
        if self.experiments.iter().any(|k| k.needs_herz()) {
            match &self.herz {
                None => return bad("herz_ratio and decomposition need a \"herz\" section".into()),
                Some(h) if !(h.q > 0.0 && h.q.is_finite()) => return bad(format!("herz.q must be positive, got {}", h.q)),
                _ => {}
            }
        }
        let (zoo, q_exponent) = match (&self.chain, self.experiments.contains(&ExperimentKind::InclusionChain)) {
            (None, true) => return bad("inclusion_chain needs a \"chain\" section".into()),
            (Some(c), _) => {
                let zoo = c.zoo.iter().map(|s| s.parse()).collect::<crate::Result<Vec<WeightPreset>>>().map_err(preset_err)?;
                (zoo, Some(c.q_exponent.parse().map_err(preset_err)?))
            }
            (None, false) => (Vec::new(), None),
        };
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.resolutions < 2 {
            return bad("resolutions must be at least 2".into());
        }
        if self.suite.count == 0 || self.suite.families.is_empty() {
            return bad("suite needs at least one function and one family".into());
        }
        if self.square.dict_size == 0 || !(self.square.beta > 0.0 && self.square.beta <= 1.0) {
            return bad("square needs dict_size >= 1 and 0 < beta <= 1".into());
        }
        if self.operators.is_empty() && self.experiments.contains(&ExperimentKind::LpRatio) {
            return bad("lp_ratio needs at least one operator".into());
        }
        Ok(Resolved { exponent, weight, zoo, q_exponent })
    }
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

fn default_dict_size() -> usize {
    8
}

fn default_suite_count() -> usize {
    20
}

fn default_probe_ppu() -> u32 {
    8
}

fn default_levels() -> usize {
    4
}

fn default_trials() -> usize {
    500
}

fn default_resolutions() -> usize {
    2
}

fn all_families() -> Vec<SuiteFamily> {
    SuiteFamily::ALL.to_vec()
}

fn default_operators() -> Vec<OperatorName> {
    vec![OperatorName::Maximal, OperatorName::SBeta]
}
