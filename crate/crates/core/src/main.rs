use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ucscreen::costbound::CostBoundModel;
use ucscreen::demandset::{self, AllocationFactors, DemandHistory};
use ucscreen::grid::{build_ptdf, Grid};
use ucscreen::harness::{
    self, render_table, CostBoundSpec, ExperimentConfig, ExperimentInputs, HarnessError, HistorySource,
    PipelineSettings, SplitSpec, Stage,
};
use ucscreen::screening::{screen_all_with, Method, ScreeningResult};
use ucscreen::solver::{SolverOptions, Status};
use ucscreen::uc::{self, ConstraintMask, UcError, UcSolution};

#[derive(Parser)]
#[command(
    name = "ucscreen",
    version,
    about = "Line-flow constraint screening for DC unit commitment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic demand history from allocation factors.
    GenData(GenDataArgs),
    /// Solve training UCs, fit the cost bound and build the demand sets.
    Fit(FitCmd),
    /// Write a screening certificate for one method.
    Screen(ScreenCmd),
    /// Solve the full or certificate-reduced UC for each row of a demand file.
    Solve(SolveCmd),
    /// Run the whole evaluation pipeline.
    Eval(EvalCmd),
    /// Screen under single-line outages and intersect the certificates.
    Topo(TopoCmd),
}

#[derive(Args)]
struct GenDataArgs {
    /// CSV with columns bus,xi.
    #[arg(long)]
    xi: PathBuf,
    /// Grid whose bus order the output should follow.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value_t = 8640)]
    periods: usize,
    #[arg(long, default_value_t = 50_000.0)]
    l_min: f64,
    #[arg(long, default_value_t = 70_000.0)]
    l_max: f64,
    #[arg(long, default_value_t = 0.05)]
    width: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    grid: PathBuf,
    /// Demand history CSV (training data).
    #[arg(long)]
    history: PathBuf,
}

#[derive(Args)]
struct BoundArgs {
    /// Number of cost-bound segments.
    #[arg(long, conflicts_with = "elbow")]
    segments: Option<usize>,
    /// Choose the segment count at the elbow of the loss curve, up to this many.
    #[arg(long)]
    elbow: Option<usize>,
    /// Upper cap on the sum of convex-combination weights.
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Screen only the flow limit being bounded (other lines unconstrained).
    #[arg(long)]
    ignore_other_lines: bool,
    /// Reject demands outside the fitted cost range instead of extrapolating the end segments.
    #[arg(long)]
    no_widen: bool,
}

impl BoundArgs {
    fn spec(&self) -> CostBoundSpec {
        match (self.segments, self.elbow) {
            (_, Some(m)) => CostBoundSpec::Elbow(m),
            (Some(n), None) => CostBoundSpec::Segments(n),
            (None, None) => CostBoundSpec::Segments(1),
        }
    }

    fn settings(&self, methods: Vec<Method>) -> PipelineSettings {
        PipelineSettings {
            methods,
            cost_bound: self.spec(),
            kappa: self.kappa,
            enforce_other_lines: !self.ignore_other_lines,
            widen_bound_to_demand_set: !self.no_widen,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Args)]
struct FitCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    bound: BoundArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScreenCmd {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    method: Method,
    /// Previously fitted cost bound; fitted from the history when omitted.
    #[arg(long)]
    cost_bound: Option<PathBuf>,
    #[command(flatten)]
    bound: BoundArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveCmd {
    #[arg(long)]
    grid: PathBuf,
    /// Demand CSV, one period per row.
    #[arg(long)]
    demand: PathBuf,
    /// Screening certificate; the full model is solved when omitted.
    #[arg(long)]
    certificate: Option<PathBuf>,
    /// Output JSON file with one solution per period.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalCmd {
    /// JSON experiment config; replaces the data and split flags.
    #[arg(long, conflicts_with_all = ["grid", "history"])]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    grid: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    history: Option<PathBuf>,
    /// Methods to evaluate (repeat or comma-separate); all four by default.
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    #[command(flatten)]
    bound: BoundArgs,
    /// Explicit test demands; the whole history trains.
    #[arg(long, conflicts_with_all = ["test_frac", "worst_case"])]
    test: Option<PathBuf>,
    #[arg(long, conflicts_with = "worst_case")]
    test_frac: Option<f64>,
    /// Test on the N highest-aggregate periods.
    #[arg(long)]
    worst_case: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TopoCmd {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "ubcc")]
    method: Method,
    /// Lines to take out one at a time (comma-separated); every non-islanding line when omitted.
    #[arg(long, value_delimiter = ',')]
    outages: Vec<String>,
    #[command(flatten)]
    bound: BoundArgs,
    /// Screen every variant with the base-case cost bound instead of refitting it per variant.
    #[arg(long)]
    fixed_bound: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn err(stage: Stage) -> impl Fn(String) -> HarnessError {
    move |m| HarnessError::stage(stage, m)
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::IoFailure {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| HarnessError::IoFailure {
        path: path.to_path_buf(),
        source,
    })
}

fn mkdir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::IoFailure {
        path: dir.to_path_buf(),
        source,
    })
}

fn load_data(data: &DataArgs) -> Result<(Grid, DemandHistory), HarnessError> {
    let grid = Grid::load(&data.grid).map_err(|e| err(Stage::Data)(e.to_string()))?;
    let history = harness::load_history(
        &HistorySource::File {
            path: data.history.clone(),
        },
        &grid,
    )?;
    Ok((grid, history))
}

fn gen_data(a: &GenDataArgs) -> Result<(), HarnessError> {
    let data = |e: demandset::DemandError| err(Stage::Data)(e.to_string());
    let mut factors = AllocationFactors::load(&a.xi).map_err(data)?;
    if let Some(g) = &a.grid {
        let grid = Grid::load(g).map_err(|e| err(Stage::Data)(e.to_string()))?;
        factors = factors.aligned_to(grid.buses()).map_err(data)?;
    }
    let h = demandset::generate_history(&factors, a.periods, (a.l_min, a.l_max), a.width, a.seed).map_err(data)?;
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        mkdir(dir)?;
    }
    h.save(&a.out).map_err(|e| err(Stage::Report)(e.to_string()))?;
    println!(
        "wrote {} periods over {} buses to {}",
        h.len(),
        h.buses().len(),
        a.out.display()
    );
    Ok(())
}

fn fit(a: &FitCmd) -> Result<(), HarnessError> {
    let (grid, history) = load_data(&a.data)?;
    let ptdf = build_ptdf(&grid).map_err(|e| err(Stage::Data)(e.to_string()))?;
    let settings = a.bound.settings(Method::ALL.to_vec());
    let (points, infeasible) = harness::training_points(&grid, &ptdf, &history, &settings.solver)?;
    let (model, curve) = harness::fit_bound(&points, settings.cost_bound)?;
    let box_set = demandset::box_from_history(&history).map_err(|e| err(Stage::Fit)(e.to_string()))?;
    let hull = demandset::hull_from_history(&history, a.bound.kappa).map_err(|e| err(Stage::Fit)(e.to_string()))?;
    mkdir(&a.out)?;
    write(&a.out.join("cost_bound.json"), &model.to_json())?;
    write(
        &a.out.join("demand_box.json"),
        &serde_json::to_string_pretty(&box_set).expect("serializes"),
    )?;
    write(
        &a.out.join("demand_hull.json"),
        &serde_json::to_string_pretty(&hull).expect("serializes"),
    )?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &points {
        w.serialize(p).map_err(|e| err(Stage::Report)(e.to_string()))?;
    }
    write(
        &a.out.join("training_costs.csv"),
        &String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8"),
    )?;
    if let Some(c) = &curve {
        write(
            &a.out.join("loss_curve.json"),
            &serde_json::to_string_pretty(c).expect("serializes"),
        )?;
        for (n, l) in c.iter().enumerate() {
            println!("segments {:>2}: loss {:.3}", n + 1, l);
        }
    }
    println!(
        "{} training points ({} infeasible periods skipped); {} segment(s):",
        points.len(),
        infeasible,
        model.segments.len()
    );
    for s in &model.segments {
        println!(
            "  [{:.3}, {:.3}]  C = {:.4} + {:.4} D",
            s.lower, s.upper, s.intercept, s.slope
        );
    }
    Ok(())
}

fn screen(a: &ScreenCmd) -> Result<(), HarnessError> {
    let (grid, history) = load_data(&a.data)?;
    let ptdf = build_ptdf(&grid).map_err(|e| err(Stage::Data)(e.to_string()))?;
    let settings = a.bound.settings(vec![a.method]);
    let bound = if !a.method.uses_bound() {
        None
    } else if let Some(p) = &a.cost_bound {
        Some(CostBoundModel::load(p).map_err(|e| err(Stage::Fit)(e.to_string()))?)
    } else {
        let (points, _) = harness::training_points(&grid, &ptdf, &history, &settings.solver)?;
        Some(harness::fit_bound(&points, settings.cost_bound)?.0)
    };
    let box_set = demandset::box_from_history(&history).map_err(|e| err(Stage::Fit)(e.to_string()))?;
    let hull = demandset::hull_from_history(&history, a.bound.kappa).map_err(|e| err(Stage::Fit)(e.to_string()))?;
    let cfg = harness::method_config(a.method, &box_set, &hull, bound.as_ref(), &settings)?;
    let cert =
        screen_all_with(&grid, &ptdf, &cfg, &settings.solver).map_err(|e| err(Stage::Screening)(e.to_string()))?;
    mkdir(&a.out)?;
    let path = a
        .out
        .join(format!("certificate_{}.json", harness::method_slug(a.method)));
    write(&path, &cert.to_json())?;
    print_certificate(&cert);
    println!("certificate written to {}", path.display());
    Ok(())
}

fn print_certificate(cert: &ScreeningResult) {
    println!(
        "{}: retained {} of {} line sides ({:.1}%), {} flagged",
        cert.method,
        cert.num_retained(),
        cert.bounds.len(),
        cert.retained_pct(),
        cert.flagged().len()
    );
}

#[derive(serde::Serialize)]
struct SolveRecord {
    period: String,
    solution: Option<UcSolution>,
    status: &'static str,
    /// Cost after fixing the commitment in the full model (reduced solves only).
    resolved_cost: Option<f64>,
}

fn solve(a: &SolveCmd) -> Result<(), HarnessError> {
    let grid = Grid::load(&a.grid).map_err(|e| err(Stage::Data)(e.to_string()))?;
    let ptdf = build_ptdf(&grid).map_err(|e| err(Stage::Data)(e.to_string()))?;
    let demands = harness::load_history(&HistorySource::File { path: a.demand.clone() }, &grid)?;
    let mask = match &a.certificate {
        Some(p) => ScreeningResult::load(p)
            .and_then(|c| c.mask(&grid))
            .map_err(|e| err(Stage::Data)(e.to_string()))?,
        None => ConstraintMask::full(grid.num_lines()),
    };
    let mut records = Vec::new();
    for t in 0..demands.len() {
        let d = demands.row(t);
        let label = demands.labels()[t].clone();
        let rec = match uc::solve_uc(&grid, &ptdf, d, &mask) {
            Ok(sol) => {
                let resolved = if a.certificate.is_some() {
                    let out = uc::fix_and_resolve(&grid, &ptdf, d, &sol.commitment)
                        .map_err(|e| err(Stage::Evaluation)(e.to_string()))?;
                    (out.status == Status::Optimal).then_some(out.objective)
                } else {
                    Some(sol.cost)
                };
                println!(
                    "{label}: cost {:.4}, committed {}/{}, full-model cost {}",
                    sol.cost,
                    sol.committed(),
                    grid.num_generators(),
                    resolved.map_or("infeasible".to_string(), |c| format!("{c:.4}"))
                );
                SolveRecord {
                    period: label,
                    solution: Some(sol),
                    status: "optimal",
                    resolved_cost: resolved,
                }
            }
            Err(UcError::Infeasible) => {
                println!("{label}: infeasible");
                SolveRecord {
                    period: label,
                    solution: None,
                    status: "infeasible",
                    resolved_cost: None,
                }
            }
            Err(e) => return Err(err(Stage::Evaluation)(e.to_string())),
        };
        records.push(rec);
    }
    write(&a.out, &serde_json::to_string_pretty(&records).expect("serializes"))
}

fn eval(a: &EvalCmd) -> Result<(), HarnessError> {
    let config = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let split = match (&a.test, a.test_frac, a.worst_case) {
                (Some(t), _, _) => SplitSpec::Explicit { test: t.clone() },
                (None, _, Some(n)) => SplitSpec::WorstCase { n_test: n },
                (None, f, None) => SplitSpec::Random {
                    test_frac: f.unwrap_or(1.0 / 6.0),
                    seed: a.seed,
                },
            };
            let methods = if a.method.is_empty() {
                Method::ALL.to_vec()
            } else {
                a.method.clone()
            };
            ExperimentConfig {
                grid: a.grid.clone().expect("required by clap"),
                history: HistorySource::File {
                    path: a.history.clone().expect("required by clap"),
                },
                split,
                settings: a.bound.settings(methods),
                out_dir: a.out.clone(),
            }
        }
    };
    let inputs = ExperimentInputs::from_config(&config)?;
    let out = harness::run_experiment(&inputs, &config.settings, config.out_dir.as_deref())?;
    for (_, cert) in &out.certificates {
        print_certificate(cert);
        let per_line: Vec<String> = cert
            .retained_by_line()
            .into_iter()
            .map(|(l, c)| format!("{l}:{c}"))
            .collect();
        println!("  retained per line: {}", per_line.join(" "));
    }
    println!();
    print!("{}", render_table(&out.report));
    Ok(())
}

fn topo(a: &TopoCmd) -> Result<(), HarnessError> {
    let (grid, history) = load_data(&a.data)?;
    let settings = a.bound.settings(vec![a.method]);
    let outages: Vec<String> = if a.outages.is_empty() {
        grid.lines()
            .iter()
            .filter(|l| grid.without_line(&l.id).is_ok_and(|g| g.is_connected()))
            .map(|l| l.id.clone())
            .collect()
    } else {
        a.outages.clone()
    };
    let report = if a.fixed_bound {
        let ptdf = build_ptdf(&grid).map_err(|e| err(Stage::Data)(e.to_string()))?;
        let bound = if a.method.uses_bound() {
            let (points, _) = harness::training_points(&grid, &ptdf, &history, &settings.solver)?;
            Some(harness::fit_bound(&points, settings.cost_bound)?.0)
        } else {
            None
        };
        let box_set = demandset::box_from_history(&history).map_err(|e| err(Stage::Fit)(e.to_string()))?;
        let hull = demandset::hull_from_history(&history, a.bound.kappa).map_err(|e| err(Stage::Fit)(e.to_string()))?;
        let cfg = harness::method_config(a.method, &box_set, &hull, bound.as_ref(), &settings)?;
        harness::topology_experiment(&grid, &outages, &cfg, &settings.solver)?
    } else {
        harness::topology_experiment_refit(&grid, &outages, a.method, &history, &settings)?
    };
    for v in &report.variants {
        println!(
            "outage {:>6}: removable {:.1}%, retained {}",
            v.outage,
            100.0 * v.removable_fraction,
            v.retained
        );
    }
    println!(
        "base removable {:.1}%, intersection over {} outages removable {:.1}%",
        100.0 * report.base_removable_fraction,
        report.variants.len(),
        100.0 * report.intersection_removable_fraction
    );
    if let Some(dir) = &a.out {
        mkdir(dir)?;
        write(
            &dir.join("topology.json"),
            &serde_json::to_string_pretty(&report).expect("serializes"),
        )?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Fit(a) => fit(a),
        Command::Screen(a) => screen(a),
        Command::Solve(a) => solve(a),
        Command::Eval(a) => eval(a),
        Command::Topo(a) => topo(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
