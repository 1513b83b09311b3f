//! Experiment execution and the single-writer output collector.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::fit::FitReport;
use crate::grid::{build_grid, Grid, GridSpec};
use crate::verify::{
    ball_pair_points, build_suite_from, check_inclusion_chain, check_lemma1, check_lemma2, decomposition_sweep,
    envelope_fit, herz_boundedness_ratio, lp_boundedness_ratio, norm_growth_points, screen_apvar, screen_arp,
    HerzSetting, Operator, ProbeConfig, RatioReport, Setting, SquareConfig, SuiteEntry, CHAIN_CLASSES,
};
use crate::weights::{a1_measure_comparison, PairSampling};

use super::config::{ExperimentConfig, ExperimentKind, OperatorName, Resolved};
use super::{
    fmt_f64, CliError, Manifest, ManifestEntry, ManifestFile, TableRole, EXIT_FAIL, EXIT_OK,
    EXIT_PRECONDITION, EXPERIMENTS_CSV, FIT_SUMMARY_CSV, MANIFEST, SEED_ENV,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub jobs: usize,
    /// Same as `"probe": true` in the config.
    pub probe: bool,
    /// Replaces the config seed; recorded in the manifest.
    pub seed_override: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: 1, probe: false, seed_override: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Ran as a counterexample probe: recorded, never failed.
    Probe,
    /// Refused: a precondition failed and probe mode was off.
    Blocked,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Probe => "probe",
            Status::Blocked => "blocked",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub role: TableRole,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: String,
    pub kind: ExperimentKind,
    pub status: Status,
    pub fit: Option<FitReport>,
    pub max_ratio: Option<f64>,
    pub refinement_growth: Option<f64>,
    pub note: String,
    pub tables: Vec<Table>,
}

impl Outcome {
    fn new(id: impl Into<String>, kind: ExperimentKind) -> Self {
        Self {
            id: id.into(),
            kind,
            status: Status::Pass,
            fit: None,
            max_ratio: None,
            refinement_growth: None,
            note: String::new(),
            tables: Vec::new(),
        }
    }

    fn with_status(mut self, pass: bool, probe: bool) -> Self {
        self.status = if probe {
            Status::Probe
        } else if pass {
            Status::Pass
        } else {
            Status::Fail
        };
        self
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        let note = note.into();
        if !note.is_empty() {
            if !self.note.is_empty() {
                self.note.push_str("; ");
            }
            self.note.push_str(&note);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub exit_code: u8,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub outcomes: Vec<Outcome>,
}

/// Decorrelated sub-seeds for the independent random streams of one run.
fn sub_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    res: &'a Resolved,
    seed: u64,
    probe: bool,
    grid: Grid,
    setting: Setting,
    suite: Vec<SuiteEntry>,
}

/// Outcome of a precondition screen.
enum Gate {
    Open,
    Probe(String),
    Blocked(String),
}

impl Context<'_> {
    fn gate(&self, failed: Option<String>) -> Gate {
        match failed {
            None => Gate::Open,
            Some(why) if self.probe => Gate::Probe(why),
            Some(why) => Gate::Blocked(why),
        }
    }

    /// Coarsest admissible probe grid over the experiment's domain with at least `ppu` points per unit.
    fn probe_config(&self, ppu: u32, levels: usize) -> ProbeConfig {
        let spec = self.grid.spec();
        let min_ppu = (4.0 * 2f64.powi(-spec.k_min)).ceil().max(1.0) as u32;
        let ppu = ppu.max(min_ppu.next_power_of_two());
        ProbeConfig::new(GridSpec { points_per_unit: ppu, ..spec }, levels)
    }

    fn screen(&self) -> ProbeConfig {
        self.probe_config(self.cfg.screen.points_per_unit, self.cfg.screen.levels)
    }

    fn square(&self) -> SquareConfig {
        let s = &self.cfg.square;
        SquareConfig { beta: s.beta, dict_size: s.dict_size, dict_seed: sub_seed(self.seed, 3), backend: s.backend }
    }

    fn herz_setting(&self) -> Result<(HerzSetting, String)> {
        let h = self.cfg.herz.as_ref().expect("validated herz section");
        let (delta, note) = match h.delta {
            Some(d) => (d, String::new()),
            None => {
                let (p, w) = self.setting.build(&self.grid)?;
                let fit = envelope_fit(&norm_growth_points(&p, &w, &self.grid)?);
                (fit.delta, format!("delta fitted = {}", fit.delta))
            }
        };
        Ok((HerzSetting { alpha: h.alpha, q: h.q, r: h.r, delta, setting: self.setting.clone() }, note))
    }
}

fn run_kind(ctx: &Context, kind: ExperimentKind) -> Vec<Outcome> {
    let result = match kind {
        ExperimentKind::Lemma1 | ExperimentKind::Lemma2 => lemma(ctx, kind),
        ExperimentKind::MeasureComparison => measure_comparison(ctx),
        ExperimentKind::NormGrowth => norm_growth(ctx),
        ExperimentKind::InclusionChain => inclusion_chain(ctx),
        ExperimentKind::LpRatio => {
            return ctx
                .cfg
                .operators
                .par_iter()
                .map(|&op| lp_ratio(ctx, op).unwrap_or_else(|e| failed(format!("lp_ratio_{}", op_name(op)), kind, e)))
                .collect()
        }
        ExperimentKind::HerzRatio => herz_ratio(ctx),
        ExperimentKind::Decomposition => decomposition(ctx),
    };
    vec![result.unwrap_or_else(|e| failed(kind.name().to_string(), kind, e))]
}

fn failed(id: String, kind: ExperimentKind, e: crate::HerzError) -> Outcome {
    Outcome { status: Status::Fail, ..Outcome::new(id, kind) }.note(format!("error: {e}"))
}

fn blocked(kind: ExperimentKind, why: String) -> Outcome {
    Outcome { status: Status::Blocked, ..Outcome::new(kind.name(), kind) }.note(why)
}

fn points_table(id: &str, x: &'static str, y: &'static str, points: &[(f64, f64)]) -> Table {
    Table {
        name: format!("{id}_points.csv"),
        role: TableRole::Points,
        header: vec!["experiment_id", x, y],
        rows: points.iter().map(|&(a, b)| vec![id.to_string(), fmt_f64(a), fmt_f64(b)]).collect(),
    }
}

fn fit_outcome(kind: ExperimentKind, fit: FitReport, probe: bool) -> Outcome {
    let pass = fit.passes() && fit.c.is_finite();
    Outcome { fit: Some(fit), ..Outcome::new(kind.name(), kind) }.with_status(pass, probe)
}

fn lemma(ctx: &Context, kind: ExperimentKind) -> Result<Outcome> {
    let mut probe = false;
    let mut note = String::new();
    if ctx.cfg.screen.enabled {
        let screen = screen_apvar(&ctx.res.weight, &ctx.res.exponent, ctx.screen())?;
        let failed = screen.divergent.then(|| format!("A_p(.) screen divergent (growth {:?})", screen.growth));
        match ctx.gate(failed) {
            Gate::Open => {}
            Gate::Probe(why) => {
                probe = true;
                note = why;
            }
            Gate::Blocked(why) => return Ok(blocked(kind, why)),
        }
    }
    let (p, w) = ctx.setting.build(&ctx.grid)?;
    let seed = sub_seed(ctx.seed, 1);
    let (fit, points, y_label) = if kind == ExperimentKind::Lemma1 {
        let pts: Vec<(f64, f64)> =
            ball_pair_points(&p, &w, &ctx.grid, ctx.cfg.trials, seed)?.into_iter().map(|(x, y)| (x, x - y)).collect();
        (check_lemma1(&p, &w, &ctx.grid, ctx.cfg.trials, seed)?, pts, "ln_quotient")
    } else {
        let pts = ball_pair_points(&p, &w, &ctx.grid, ctx.cfg.trials, seed)?;
        (check_lemma2(&p, &w, &ctx.grid, ctx.cfg.trials, seed)?, pts, "ln_norm_ratio")
    };
    let mut out = fit_outcome(kind, fit, probe).note(note);
    out.tables.push(points_table(kind.name(), "ln_measure_ratio", y_label, &points));
    Ok(out)
}

fn measure_comparison(ctx: &Context) -> Result<Outcome> {
    let (_, w) = ctx.setting.build(&ctx.grid)?;
    let mc = a1_measure_comparison(&w, &ctx.grid, PairSampling::Random, ctx.cfg.trials, sub_seed(ctx.seed, 1))?;
    Ok(fit_outcome(ExperimentKind::MeasureComparison, mc.fit, false))
}

fn norm_growth(ctx: &Context) -> Result<Outcome> {
    let kind = ExperimentKind::NormGrowth;
    let (p, w) = ctx.setting.build(&ctx.grid)?;
    let points = norm_growth_points(&p, &w, &ctx.grid)?;
    let fit = envelope_fit(&points);
    let mut out = fit_outcome(kind, fit, false);
    if !(fit.delta > 0.0 && fit.delta < 1.0) {
        out = out.note(format!("delta = {} outside (0, 1)", fit.delta));
    }
    out.tables.push(points_table(kind.name(), "n_k_minus_l_ln2", "ln_norm_ratio", &points));
    Ok(out)
}

fn inclusion_chain(ctx: &Context) -> Result<Outcome> {
    let kind = ExperimentKind::InclusionChain;
    let chain = ctx.cfg.chain.as_ref().expect("validated chain section");
    let q = ctx.res.q_exponent.as_ref().expect("validated chain exponent");
    let table = check_inclusion_chain(&ctx.res.zoo, &ctx.res.exponent, q, ctx.probe_config(chain.points_per_unit, chain.levels))?;
    let mut rows = Vec::new();
    for row in &table.rows {
        for (class, probe) in CHAIN_CLASSES.iter().zip(&row.probes) {
            for (j, (&res, &v)) in probe.resolutions.iter().zip(&probe.values).enumerate() {
                rows.push(vec![
                    row.weight.clone(),
                    class.to_string(),
                    res.to_string(),
                    fmt_f64(v),
                    if j == 0 { String::new() } else { fmt_f64(probe.growth[j - 1]) },
                    probe.finite().to_string(),
                ]);
            }
        }
    }
    let anti = table.anti_monotone_rows();
    let mut out = Outcome::new(kind.name(), kind).with_status(anti == 0, false).note(format!(
        "verdicts {}",
        table
            .rows
            .iter()
            .map(|r| format!("{}:{}", r.weight, r.verdicts().iter().map(|&f| if f { 'F' } else { 'D' }).collect::<String>()))
            .collect::<Vec<_>>()
            .join(" ")
    ));
    if anti > 0 {
        out = out.note(format!("{anti} anti-monotone rows"));
    }
    out.tables.push(Table {
        name: "inclusion_chain.csv".into(),
        role: TableRole::Chain,
        header: vec!["weight", "class", "resolution", "value", "growth", "finite"],
        rows,
    });
    Ok(out)
}

fn op_name(op: OperatorName) -> &'static str {
    match op {
        OperatorName::Maximal => "maximal",
        OperatorName::SBeta => "s_beta",
    }
}

fn ratio_table(id: &str, report: &RatioReport) -> Table {
    Table {
        name: format!("{id}.csv"),
        role: TableRole::Ratios,
        header: vec!["experiment_id", "function_id", "resolution", "dict_size", "input_norm", "output_norm", "ratio"],
        rows: report
            .rows
            .iter()
            .map(|r| {
                vec![
                    id.to_string(),
                    r.function_id.clone(),
                    r.resolution.to_string(),
                    r.dict_size.to_string(),
                    fmt_f64(r.input_norm),
                    fmt_f64(r.output_norm),
                    fmt_f64(r.ratio),
                ]
            })
            .collect(),
    }
}

fn ratio_outcome(id: String, kind: ExperimentKind, report: &RatioReport) -> Outcome {
    let mut out = Outcome {
        max_ratio: Some(report.max_ratio),
        refinement_growth: Some(report.refinement_growth),
        ..Outcome::new(id.clone(), kind)
    }
    .with_status(report.passes(), report.probe);
    if report.probe {
        out = out.note(format!("trend {}", if report.monotone_trend { "monotone" } else { "not monotone" }));
    }
    if !report.skipped.is_empty() {
        out = out.note(format!("skipped zero-norm inputs: {}", report.skipped.join(", ")));
    }
    out.tables.push(ratio_table(&id, report));
    out
}

fn lp_ratio(ctx: &Context, op: OperatorName) -> Result<Outcome> {
    let operator = match op {
        OperatorName::Maximal => Operator::Maximal,
        OperatorName::SBeta => Operator::SBeta(ctx.square()),
    };
    let report = lp_boundedness_ratio(&operator, &ctx.setting, &ctx.suite, ctx.grid.spec(), ctx.cfg.resolutions)?;
    Ok(ratio_outcome(format!("lp_ratio_{}", op_name(op)), ExperimentKind::LpRatio, &report))
}

/// Window and `A_(r p(.))` screen for the Herz experiments. A rejected window blocks unless probing;
/// a failed weight screen only downgrades to probe mode.
fn herz_gate(ctx: &Context, kind: ExperimentKind) -> Result<std::result::Result<(HerzSetting, bool, String), Outcome>> {
    let (hs, mut note) = ctx.herz_setting()?;
    let decision = hs.window(&ctx.grid)?;
    let mut probe = false;
    let failed = (!decision.accept).then(|| format!("outside window: {}", decision.reasons().join(", ")));
    match ctx.gate(failed) {
        Gate::Open => {}
        Gate::Probe(why) => {
            probe = true;
            note = [note, why].iter().filter(|s| !s.is_empty()).cloned().collect::<Vec<_>>().join("; ");
        }
        Gate::Blocked(why) => return Ok(Err(blocked(kind, why))),
    }
    if ctx.cfg.screen.enabled && !probe {
        let screen = screen_arp(&ctx.res.weight, &ctx.res.exponent, hs.r, ctx.screen())?;
        if screen.divergent {
            probe = true;
            note = [note, format!("A_rp(.) screen divergent (growth {:?}), downgraded to probe", screen.growth)]
                .iter()
                .filter(|s| !s.is_empty())
                .cloned()
                .collect::<Vec<_>>()
                .join("; ");
        }
    }
    Ok(Ok((hs, probe, note)))
}

fn herz_ratio(ctx: &Context) -> Result<Outcome> {
    let kind = ExperimentKind::HerzRatio;
    let (hs, probe, note) = match herz_gate(ctx, kind)? {
        Ok(g) => g,
        Err(b) => return Ok(b),
    };
    let homogeneous = ctx.cfg.herz.as_ref().is_none_or(|h| h.homogeneous);
    let report =
        herz_boundedness_ratio(&hs, &ctx.square(), &ctx.suite, ctx.grid.spec(), ctx.cfg.resolutions, homogeneous, probe)?;
    Ok(ratio_outcome(kind.name().into(), kind, &report).note(note))
}

fn decomposition(ctx: &Context) -> Result<Outcome> {
    let kind = ExperimentKind::Decomposition;
    let (hs, probe, note) = match herz_gate(ctx, kind)? {
        Ok(g) => g,
        Err(b) => return Ok(b),
    };
    let homogeneous = ctx.cfg.herz.as_ref().is_none_or(|h| h.homogeneous);
    let report = decomposition_sweep(&hs, &ctx.square(), &ctx.suite, ctx.grid.spec(), homogeneous)?;
    let rows = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.function_id.clone(),
                fmt_f64(r.t1),
                fmt_f64(r.t2),
                fmt_f64(r.t3),
                fmt_f64(r.herz_sf),
                fmt_f64(r.herz_f),
                r.sanity.to_string(),
            ]
        })
        .collect();
    let c = report.constants;
    let mut out = Outcome::new(kind.name(), kind).with_status(report.passes(), probe).note(note).note(format!(
        "branch {:?}; T constants {} {} {}; sanity violations {}",
        report.branch,
        fmt_f64(c[0]),
        fmt_f64(c[1]),
        fmt_f64(c[2]),
        report.sanity_violations
    ));
    out.tables.push(Table {
        name: "decomposition.csv".into(),
        role: TableRole::Decomposition,
        header: vec!["function_id", "t1", "t2", "t3", "herz_sf", "herz_f", "sanity"],
        rows,
    });
    Ok(out)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn grid_hash(grid: &Grid) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&grid.spec()).expect("grid spec serializes"));
    for x in grid.axis() {
        h.update(x.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> std::result::Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Loads, validates and executes a config, then writes every table, `experiments.csv`,
/// `fit_summary.csv` and `manifest.json` into the output directory.
///
/// Config and I/O problems are errors (exit code 2 at the command line); experiment outcomes
/// are folded into [`RunSummary::exit_code`].
pub fn run(config_path: &Path, opts: &RunOptions) -> std::result::Result<RunSummary, CliError> {
    let raw = fs::read(config_path).map_err(|e| CliError::Config(format!("{}: {e}", config_path.display())))?;
    let text = String::from_utf8(raw.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    let cfg = ExperimentConfig::parse(&text)?;
    let res = cfg.validate()?;
    if opts.jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let (seed, seed_source) = match opts.seed_override {
        Some(s) => (s, SEED_ENV.to_string()),
        None => (cfg.seed, "config".to_string()),
    };
    let grid = build_grid(cfg.grid).map_err(|e| CliError::Config(e.to_string()))?;
    let setting = Setting {
        p: res.exponent,
        w: res.weight.clone(),
        p_infinity: cfg.p_infinity,
    };
    setting.build(&grid).map_err(|e| CliError::Config(e.to_string()))?;
    let suite_seed = cfg.suite.seed.unwrap_or(sub_seed(seed, 2));
    let suite = build_suite_from(cfg.grid, &cfg.suite.families, cfg.suite.count, suite_seed);
    let ctx = Context { cfg: &cfg, res: &res, seed, probe: opts.probe || cfg.probe, grid, setting, suite };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let outcomes: Vec<Outcome> =
        pool.install(|| cfg.experiments.par_iter().flat_map_iter(|&k| run_kind(&ctx, k)).collect());

    let exit_code = if outcomes.iter().any(|o| o.status == Status::Blocked) {
        EXIT_PRECONDITION
    } else if outcomes.iter().any(|o| o.status == Status::Fail) {
        EXIT_FAIL
    } else {
        EXIT_OK
    };

    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let mut files = BTreeMap::new();
    let mut entries = Vec::new();
    for o in &outcomes {
        let mut listed = Vec::new();
        for t in &o.tables {
            if files.contains_key(&t.name) {
                return Err(CliError::Config(format!("experiment {} listed twice", o.id)));
            }
            files.insert(t.name.clone(), write_csv(&dir.join(&t.name), &t.header, &t.rows)?);
            listed.push(ManifestFile { name: t.name.clone(), role: t.role });
        }
        entries.push(ManifestEntry { id: o.id.clone(), kind: o.kind, status: o.status, files: listed });
    }
    if cfg.experiments.iter().any(|k| matches!(k, ExperimentKind::HerzRatio | ExperimentKind::Decomposition))
        || (cfg.experiments.contains(&ExperimentKind::LpRatio) && cfg.operators.contains(&OperatorName::SBeta))
    {
        let mut buf = Vec::new();
        ctx.square().dictionary(cfg.grid.dim).and_then(|d| d.dump_csv(&mut buf)).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(dir.join("kernels.csv"), &buf)?;
        files.insert("kernels.csv".into(), sha256_hex(&buf));
    }

    let status_rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|o| {
            let f = o.fit.as_ref();
            vec![
                o.id.clone(),
                o.kind.name().to_string(),
                o.status.as_str().to_string(),
                opt(f.map(|f| f.c)),
                opt(f.map(|f| f.delta)),
                opt(f.map(|f| f.residual)),
                f.map(|f| f.sample_count.to_string()).unwrap_or_default(),
                f.map(|f| f.envelope_violations.to_string()).unwrap_or_default(),
                opt(o.max_ratio),
                opt(o.refinement_growth),
                o.note.clone(),
            ]
        })
        .collect();
    files.insert(
        EXPERIMENTS_CSV.into(),
        write_csv(
            &dir.join(EXPERIMENTS_CSV),
            &[
                "experiment_id",
                "kind",
                "status",
                "C",
                "delta",
                "residual",
                "samples",
                "violations",
                "max_ratio",
                "refinement_growth",
                "note",
            ],
            &status_rows,
        )?,
    );
    let fit_rows: Vec<Vec<String>> = outcomes
        .iter()
        .filter_map(|o| {
            o.fit.map(|f| {
                vec![
                    o.id.clone(),
                    fmt_f64(f.c),
                    fmt_f64(f.delta),
                    fmt_f64(f.residual),
                    f.sample_count.to_string(),
                    f.envelope_violations.to_string(),
                ]
            })
        })
        .collect();
    files.insert(
        FIT_SUMMARY_CSV.into(),
        write_csv(&dir.join(FIT_SUMMARY_CSV), &["experiment_id", "C", "delta", "residual", "samples", "violations"], &fit_rows)?,
    );

    let manifest = Manifest {
        tool: "herzlab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: sha256_hex(&raw),
        grid_sha256: grid_hash(&ctx.grid),
        seed,
        seed_source,
        probe: ctx.probe,
        exit_code,
        experiments: entries,
        files,
    };
    let mut json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    json.push('\n');
    fs::write(dir.join(MANIFEST), json)?;
    Ok(RunSummary { exit_code, output_dir: dir, seed, outcomes })
}
