//! End-to-end evaluation: fit on training periods, screen, then solve and
//! check reduced problems on test periods.

mod report;
mod split;
mod topology;

pub use report::{
    emit_report, parse_report, render_table, EvaluationReport, MethodReport, MethodTiming, ReportFormat, TimeStat,
    TimingReport, TABLE_ROWS,
};
pub use split::{random_split, random_split_indices, worst_case_split, worst_case_split_indices};
pub use topology::{topology_experiment, topology_experiment_refit, TopologyReport, VariantSummary};

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costbound::{self, CostBoundModel, CostPoint};
use crate::demandset::{self, AllocationFactors, DemandHistory, DemandSet};
use crate::grid::{build_ptdf, Grid, PtdfMatrix};
use crate::screening::{screen_all_with, Method, MethodConfig, ScreeningResult};
use crate::solver::{SolverOptions, Status};
use crate::uc::{self, ConstraintMask, UcError};

/// Relative tolerance separating an exact from a suboptimal verdict.
pub const COST_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Data,
    Split,
    Training,
    Fit,
    Screening,
    Evaluation,
    Report,
    Topology,
}

impl Stage {
    /// Process exit code for a failure in this stage.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Data => 3,
            Stage::Split => 4,
            Stage::Training => 5,
            Stage::Fit => 6,
            Stage::Screening => 7,
            Stage::Evaluation => 8,
            Stage::Report => 9,
            Stage::Topology => 10,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Data => "data",
            Stage::Split => "split",
            Stage::Training => "training",
            Stage::Fit => "fit",
            Stage::Screening => "screening",
            Stage::Evaluation => "evaluation",
            Stage::Report => "report",
            Stage::Topology => "topology",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("[split] invalid split: {0}")]
    InvalidSplit(String),
    #[error("[topology] removing line `{0}` islands the grid")]
    IslandingOutage(String),
    #[error("[report] i/o failure on {path}: {source}")]
    IoFailure { path: PathBuf, source: std::io::Error },
    #[error("[{stage}] {message}")]
    Stage { stage: Stage, message: String },
}

impl HarnessError {
    pub fn stage(stage: Stage, err: impl fmt::Display) -> Self {
        HarnessError::Stage {
            stage,
            message: err.to_string(),
        }
    }

    pub fn which_stage(&self) -> Stage {
        match self {
            HarnessError::InvalidSplit(_) => Stage::Split,
            HarnessError::IslandingOutage(_) => Stage::Topology,
            HarnessError::IoFailure { .. } => Stage::Report,
            HarnessError::Stage { stage, .. } => *stage,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.which_stage().exit_code()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistorySource {
    File {
        path: PathBuf,
    },
    Generate {
        xi: PathBuf,
        periods: usize,
        l_range: [f64; 2],
        #[serde(default = "default_width")]
        width: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSpec {
    Random {
        test_frac: f64,
        seed: u64,
    },
    WorstCase {
        n_test: usize,
    },
    /// Every history period trains; the test periods come from this file.
    Explicit {
        test: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostBoundSpec {
    Segments(usize),
    /// Pick the segment count at the elbow of the loss curve up to this many.
    Elbow(usize),
}

fn default_width() -> f64 {
    0.05
}
fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_kappa() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_bound() -> CostBoundSpec {
    CostBoundSpec::Segments(1)
}

/// Everything about a run except where the data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSettings {
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_bound")]
    pub cost_bound: CostBoundSpec,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_true")]
    pub enforce_other_lines: bool,
    /// Stretch the outer cost-bound segments over the aggregate-demand range
    /// of each method's demand set instead of rejecting those demands.
    #[serde(default = "default_true")]
    pub widen_bound_to_demand_set: bool,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            methods: default_methods(),
            cost_bound: default_bound(),
            kappa: 1.0,
            enforce_other_lines: true,
            widen_bound_to_demand_set: true,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub grid: PathBuf,
    pub history: HistorySource,
    pub split: SplitSpec,
    #[serde(flatten)]
    pub settings: PipelineSettings,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads a JSON config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::stage(Stage::Config, e))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| HarnessError::stage(Stage::Config, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.grid);
        match &mut cfg.history {
            HistorySource::File { path } => fix(path),
            HistorySource::Generate { xi, .. } => fix(xi),
        }
        if let SplitSpec::Explicit { test } = &mut cfg.split {
            fix(test);
        }
        if let Some(out) = &mut cfg.out_dir {
            fix(out);
        }
        Ok(cfg)
    }
}

/// In-memory inputs of a run.
#[derive(Debug, Clone)]
pub struct ExperimentInputs {
    pub grid: Grid,
    pub train: DemandHistory,
    pub test: DemandHistory,
}

pub fn load_history(source: &HistorySource, grid: &Grid) -> Result<DemandHistory, HarnessError> {
    let h = match source {
        HistorySource::File { path } => DemandHistory::load(path),
        HistorySource::Generate {
            xi,
            periods,
            l_range,
            width,
            seed,
        } => AllocationFactors::load(xi)
            .and_then(|f| f.aligned_to(grid.buses()))
            .and_then(|f| demandset::generate_history(&f, *periods, (l_range[0], l_range[1]), *width, *seed)),
    }
    .map_err(|e| HarnessError::stage(Stage::Data, e))?;
    h.aligned_to(grid.buses())
        .map_err(|e| HarnessError::stage(Stage::Data, e))
}

impl ExperimentInputs {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let grid = Grid::load(&cfg.grid).map_err(|e| HarnessError::stage(Stage::Data, e))?;
        let history = load_history(&cfg.history, &grid)?;
        let (train, test) = match &cfg.split {
            SplitSpec::Random { test_frac, seed } => random_split(&history, *test_frac, *seed)?,
            SplitSpec::WorstCase { n_test } => worst_case_split(&history, *n_test)?,
            SplitSpec::Explicit { test } => {
                let t = DemandHistory::load(test)
                    .and_then(|t| t.aligned_to(grid.buses()))
                    .map_err(|e| HarnessError::stage(Stage::Data, e))?;
                (history, t)
            }
        };
        Ok(Self { grid, train, test })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Exact,
    Suboptimal,
    Infeasible,
}

/// One (test period, method) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodEvaluation {
    pub period: String,
    pub method: Method,
    pub full_cost: f64,
    pub reduced_cost: f64,
    pub resolved_cost: Option<f64>,
    pub verdict: Verdict,
    pub cost_error_pct: Option<f64>,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub report: EvaluationReport,
    pub training_points: Vec<CostPoint>,
    pub cost_bound: Option<CostBoundModel>,
    pub loss_curve: Option<Vec<f64>>,
    pub certificates: Vec<(Method, ScreeningResult)>,
    pub evaluations: Vec<PeriodEvaluation>,
}

fn stage<T, E: fmt::Display>(s: Stage, r: Result<T, E>) -> Result<T, HarnessError> {
    r.map_err(|e| HarnessError::stage(s, e))
}

/// Persists artifacts as they are produced, when an output directory is set.
struct Sink<'a>(Option<&'a Path>);

impl Sink<'_> {
    fn write(&self, name: &str, text: &str) -> Result<(), HarnessError> {
        let Some(dir) = self.0 else { return Ok(()) };
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|source| HarnessError::IoFailure { path, source })
    }

    fn history(&self, name: &str, h: &DemandHistory) -> Result<(), HarnessError> {
        let Some(dir) = self.0 else { return Ok(()) };
        stage(Stage::Report, h.save(dir.join(name)))
    }
}

fn csv_text<T: Serialize>(rows: &[T]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        stage(Stage::Report, w.serialize(r))?;
    }
    let bytes = stage(Stage::Report, w.into_inner())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Solves the full UC for every training period in parallel.
pub fn training_points(
    grid: &Grid,
    ptdf: &PtdfMatrix,
    train: &DemandHistory,
    opts: &SolverOptions,
) -> Result<(Vec<CostPoint>, usize), HarnessError> {
    let full = ConstraintMask::full(grid.num_lines());
    let solved: Vec<Result<Option<CostPoint>, UcError>> = (0..train.len())
        .into_par_iter()
        .map(|t| match uc::solve_uc_with(grid, ptdf, train.row(t), &full, opts) {
            Ok(sol) => Ok(Some(CostPoint {
                demand: train.aggregate(t),
                cost: sol.cost,
            })),
            Err(UcError::Infeasible) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut points = Vec::new();
    let mut infeasible = 0;
    for r in solved {
        match stage(Stage::Training, r)? {
            Some(p) => points.push(p),
            None => infeasible += 1,
        }
    }
    Ok((points, infeasible))
}

/// Fitted cost bound, plus the loss curve when the elbow rule picked the segment count.
pub fn fit_bound(
    points: &[CostPoint],
    spec: CostBoundSpec,
) -> Result<(CostBoundModel, Option<Vec<f64>>), HarnessError> {
    match spec {
        CostBoundSpec::Segments(n) => Ok((stage(Stage::Fit, costbound::fit_cost_bound(points, n))?, None)),
        CostBoundSpec::Elbow(max) => {
            let curve = stage(Stage::Fit, costbound::quantile_loss_curve(points, max))?;
            let n = costbound::elbow(&curve);
            Ok((stage(Stage::Fit, costbound::fit_cost_bound(points, n))?, Some(curve)))
        }
    }
}

/// Screening configuration for one method from the training demand sets.
pub fn method_config(
    method: Method,
    box_set: &DemandSet,
    hull: &DemandSet,
    bound: Option<&CostBoundModel>,
    settings: &PipelineSettings,
) -> Result<MethodConfig, HarnessError> {
    let set = if method.uses_hull() {
        hull.clone()
    } else {
        box_set.clone()
    };
    let cost_bound = if method.uses_bound() {
        let b = bound.ok_or_else(|| HarnessError::stage(Stage::Fit, "no cost bound fitted"))?;
        Some(if settings.widen_bound_to_demand_set {
            let (lo, hi) = set.aggregate_range();
            b.widened(lo, hi)
        } else {
            b.clone()
        })
    } else {
        None
    };
    let mut cfg = MethodConfig::new(method, set, cost_bound);
    cfg.enforce_other_lines = settings.enforce_other_lines;
    Ok(cfg)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

struct PeriodResult {
    full_time: f64,
    reduced_times: Vec<f64>,
    evals: Vec<PeriodEvaluation>,
}

fn evaluate_period(
    grid: &Grid,
    ptdf: &PtdfMatrix,
    label: &str,
    demand: &[f64],
    masks: &[(Method, ConstraintMask)],
    opts: &SolverOptions,
) -> Result<Option<PeriodResult>, UcError> {
    let start = Instant::now();
    let full = match uc::solve_uc_with(grid, ptdf, demand, &ConstraintMask::full(grid.num_lines()), opts) {
        Ok(s) => s,
        Err(UcError::Infeasible) => return Ok(None),
        Err(e) => return Err(e),
    };
    let full_time = start.elapsed().as_secs_f64();
    let mut reduced_times = Vec::with_capacity(masks.len());
    let mut evals = Vec::with_capacity(masks.len());
    for (method, mask) in masks {
        let start = Instant::now();
        let reduced = uc::solve_uc_with(grid, ptdf, demand, mask, opts)?;
        reduced_times.push(start.elapsed().as_secs_f64());
        let check = uc::fix_and_resolve_with(grid, ptdf, demand, &reduced.commitment, opts)?;
        let (verdict, resolved, err) = match check.status {
            Status::Optimal => {
                let gap = check.objective - full.cost;
                let rel = gap / full.cost.abs().max(1.0);
                let verdict = if rel.abs() <= COST_REL_TOL {
                    Verdict::Exact
                } else {
                    Verdict::Suboptimal
                };
                let pct = if verdict == Verdict::Exact { 0.0 } else { 100.0 * rel };
                (verdict, Some(check.objective), Some(pct))
            }
            _ => (Verdict::Infeasible, None, None),
        };
        evals.push(PeriodEvaluation {
            period: label.to_string(),
            method: *method,
            full_cost: full.cost,
            reduced_cost: reduced.cost,
            resolved_cost: resolved,
            verdict,
            cost_error_pct: err,
        });
    }
    Ok(Some(PeriodResult {
        full_time,
        reduced_times,
        evals,
    }))
}

/// Fit, screen and evaluate on in-memory inputs; artifacts go to `out_dir`
/// when given.
pub fn run_experiment(
    inputs: &ExperimentInputs,
    settings: &PipelineSettings,
    out_dir: Option<&Path>,
) -> Result<PipelineOutcome, HarnessError> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::IoFailure {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let sink = Sink(out_dir);
    let grid = &inputs.grid;
    let opts = &settings.solver;
    if inputs.train.is_empty() {
        return Err(HarnessError::InvalidSplit("empty training set".into()));
    }
    stage(Stage::Config, check_settings(settings))?;
    let ptdf = stage(Stage::Data, build_ptdf(grid))?;
    sink.history("train.csv", &inputs.train)?;
    sink.history("test.csv", &inputs.test)?;

    // Step 1: historical solutions, demand sets, cost bound.
    let (points, n_train_infeasible) = training_points(grid, &ptdf, &inputs.train, opts)?;
    sink.write("training_costs.csv", &csv_text(&points)?)?;
    let box_set = stage(Stage::Fit, demandset::box_from_history(&inputs.train))?;
    let hull = stage(Stage::Fit, demandset::hull_from_history(&inputs.train, settings.kappa))?;
    let needs_bound = settings.methods.iter().any(|m| m.uses_bound());
    let (bound, curve) = if needs_bound {
        let (b, c) = fit_bound(&points, settings.cost_bound)?;
        sink.write("cost_bound.json", &b.to_json())?;
        if let Some(c) = &c {
            sink.write(
                "loss_curve.json",
                &serde_json::to_string_pretty(c).expect("curve serializes"),
            )?;
        }
        (Some(b), c)
    } else {
        (None, None)
    };

    // Step 2: screening certificates.
    let mut certificates = Vec::new();
    let mut screening_times = Vec::new();
    for &m in &settings.methods {
        let cfg = method_config(m, &box_set, &hull, bound.as_ref(), settings)?;
        let start = Instant::now();
        let cert = stage(Stage::Screening, screen_all_with(grid, &ptdf, &cfg, opts))?;
        screening_times.push(start.elapsed().as_secs_f64());
        sink.write(&format!("certificate_{}.json", method_slug(m)), &cert.to_json())?;
        certificates.push((m, cert));
    }
    let masks: Vec<(Method, ConstraintMask)> = certificates
        .iter()
        .map(|(m, c)| Ok((*m, stage(Stage::Screening, c.mask(grid))?)))
        .collect::<Result<_, HarnessError>>()?;

    // Steps 3-4: reduced UC and fix-and-resolve per test period.
    let per_period: Vec<Result<Option<PeriodResult>, UcError>> = (0..inputs.test.len())
        .into_par_iter()
        .map(|t| evaluate_period(grid, &ptdf, &inputs.test.labels()[t], inputs.test.row(t), &masks, opts))
        .collect();
    let mut results = Vec::new();
    let mut skipped = 0;
    for r in per_period {
        match stage(Stage::Evaluation, r)? {
            Some(p) => results.push(p),
            None => skipped += 1,
        }
    }
    let evaluations: Vec<PeriodEvaluation> = results.iter().flat_map(|r| r.evals.iter().cloned()).collect();
    sink.write("evaluations.csv", &csv_text(&evaluations)?)?;

    // Step 5: metrics.
    let full_times: Vec<f64> = results.iter().map(|r| r.full_time).collect();
    let full_stat = TimeStat::from_samples(&full_times);
    let mut method_reports = Vec::new();
    let mut timings = Vec::new();
    for (k, (m, cert)) in certificates.iter().enumerate() {
        let evals: Vec<&PeriodEvaluation> = results.iter().map(|r| &r.evals[k]).collect();
        let count = |v: Verdict| evals.iter().filter(|e| e.verdict == v).count();
        let errs: Vec<f64> = evals.iter().filter_map(|e| e.cost_error_pct).collect();
        let sub_errs: Vec<f64> = evals
            .iter()
            .filter(|e| e.verdict == Verdict::Suboptimal)
            .filter_map(|e| e.cost_error_pct)
            .collect();
        method_reports.push(MethodReport {
            method: *m,
            certificate_digest: cert.config_digest.clone(),
            retained_constraints: cert.num_retained(),
            retained_constraints_pct: cert.retained_pct(),
            flagged_sides: cert.flagged().len(),
            n_exact: count(Verdict::Exact),
            n_infeasible: count(Verdict::Infeasible),
            n_suboptimal: count(Verdict::Suboptimal),
            cost_error_pct: mean(&errs),
            cost_error_pct_suboptimal: mean(&sub_errs),
            max_cost_error_pct: errs.iter().copied().fold(0.0, f64::max),
        });
        let reduced: Vec<f64> = results.iter().map(|r| r.reduced_times[k]).collect();
        let reduced_stat = TimeStat::from_samples(&reduced);
        timings.push(MethodTiming {
            method: *m,
            screening_time_s: screening_times[k],
            reduced_uc_time_s: reduced_stat,
            computational_burden_pct: if full_stat.mean > 0.0 {
                100.0 * reduced_stat.mean / full_stat.mean
            } else {
                100.0
            },
        });
    }
    let report = EvaluationReport {
        grid: grid.name.clone(),
        n_train: inputs.train.len(),
        n_train_infeasible,
        n_test: inputs.test.len(),
        n_test_skipped: skipped,
        line_sides: 2 * grid.num_lines(),
        cost_bound_segments: bound.as_ref().map(|b| b.segments.len()),
        methods: method_reports,
        timing: Some(TimingReport {
            full_uc_time_s: full_stat,
            methods: timings,
        }),
    };
    if let Some(dir) = out_dir {
        emit_report(&report, dir, ReportFormat::Both)?;
    }
    Ok(PipelineOutcome {
        report,
        training_points: points,
        cost_bound: bound,
        loss_curve: curve,
        certificates,
        evaluations,
    })
}

fn check_settings(s: &PipelineSettings) -> Result<(), String> {
    if !(s.kappa >= 1.0) {
        return Err(format!("kappa must be at least 1, got {}", s.kappa));
    }
    match s.cost_bound {
        CostBoundSpec::Segments(0) | CostBoundSpec::Elbow(0) => Err("cost bound needs at least one segment".into()),
        _ => Ok(()),
    }
}

pub fn method_slug(m: Method) -> &'static str {
    match m {
        Method::Bn => "bn",
        Method::Ub => "ub",
        Method::Cc => "cc",
        Method::Ubcc => "ubcc",
    }
}

pub fn run_pipeline(config: &ExperimentConfig) -> Result<EvaluationReport, HarnessError> {
    let inputs = ExperimentInputs::from_config(config)?;
    Ok(run_experiment(&inputs, &config.settings, config.out_dir.as_deref())?.report)
}
