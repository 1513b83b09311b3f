//! Lemmas and the main theorem as measurable fits and bounded-ratio experiments.

mod chain;
mod lemmas;
mod ratios;
mod suite;

pub use crate::fit::{envelope_fit, fixed_slope_fit, FitReport};
pub use chain::{check_inclusion_chain, screen_apvar, screen_arp, ChainRow, ChainTable, ProbeConfig, CHAIN_CLASSES};
pub use lemmas::{
    ball_pair_points, check_lemma1, check_lemma2, check_rubio, estimate_norm_growth_delta, maximal_norm_surrogate, norm_growth_points, validate_window,
    RubioCheck, WindowDecision, NORM_GROWTH_MIN_SHELLS,
};
pub use ratios::{
    decomposition_diagnostic, decomposition_sweep, far_shell_constant, herz_boundedness_ratio,
    lp_boundedness_ratio, Applier, Decomposition, DecompositionReport, DecompositionRow, HerzSetting, Operator,
    QBranch, RatioReport, RatioRow, Setting, SquareConfig, MAX_REFINEMENT_GROWTH,
};
pub use suite::{build_suite, build_suite_from, SuiteEntry, SuiteFamily, TestFunction};
