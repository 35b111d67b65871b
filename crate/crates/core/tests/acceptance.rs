//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use ucscreen::costbound::{fit_cost_bound, CostPoint};
use ucscreen::demandset::{self, membership, AllocationFactors, DemandSet};
use ucscreen::grid::{build_ptdf, Grid};
use ucscreen::harness::{
    self, parse_report, topology_experiment, topology_experiment_refit, worst_case_split, CostBoundSpec,
    ExperimentInputs, PipelineSettings, Verdict,
};
use ucscreen::screening::{screen_line, Method, MethodConfig, ScreeningResult};
use ucscreen::solver::{solve_lp, solve_milp, LinearProgram, Relation, Sense, SolverOptions, Status, VarId, VarKind};
use ucscreen::uc::{solve_uc, ConstraintMask, Side};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

type Sides = BTreeSet<(String, Side)>;

fn sides(list: &[(&str, Side)]) -> Sides {
    list.iter().map(|(l, s)| (l.to_string(), *s)).collect()
}

fn retained(cert: &ScreeningResult) -> Sides {
    cert.bounds
        .iter()
        .filter(|b| !b.removable)
        .map(|b| (b.line.clone(), b.side))
        .collect()
}

/// Same retained sides per line, allowing the two sides of a line to be swapped.
fn same_up_to_flip(ours: &Sides, theirs: &Sides, lines: &[&str]) -> bool {
    lines.iter().all(|&l| {
        let pick =
            |s: &Sides| -> BTreeSet<Side> { s.iter().filter(|(id, _)| id == l).map(|(_, side)| *side).collect() };
        let a = pick(ours);
        let b = pick(theirs);
        let flipped: BTreeSet<Side> = b
            .iter()
            .map(|s| match s {
                Side::Lower => Side::Upper,
                Side::Upper => Side::Lower,
            })
            .collect();
        a == b || a == flipped
    })
}

fn criterion_1() -> Outcome {
    use Side::{Lower as L, Upper as U};
    let expected = [
        (
            "BN",
            7,
            sides(&[
                ("l1", L),
                ("l1", U),
                ("l2", U),
                ("l3", U),
                ("l4", L),
                ("l4", U),
                ("l5", L),
            ]),
        ),
        (
            "UB",
            6,
            sides(&[("l1", U), ("l2", U), ("l3", U), ("l4", L), ("l4", U), ("l5", L)]),
        ),
        ("CC", 5, sides(&[("l1", U), ("l2", U), ("l4", L), ("l4", U), ("l5", L)])),
        ("UB+CC", 3, sides(&[("l1", U), ("l4", L), ("l4", U)])),
    ];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_ucscreen"))
        .arg("eval")
        .arg("--grid")
        .arg(fixture("five_node.json"))
        .arg("--history")
        .arg(fixture("five_node_history.csv"))
        .arg("--test")
        .arg(fixture("five_node_test.csv"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    check(out.status.success(), format!("eval exited with {}", out.status))?;
    check(elapsed < 5.0, format!("eval took {elapsed:.2} s"))?;
    let stdout = String::from_utf8_lossy(&out.stdout);

    let lines = ["l1", "l2", "l3", "l4", "l5"];
    let mut totals = Vec::new();
    for (label, total, table) in &expected {
        let line = stdout
            .lines()
            .find(|l| l.starts_with(&format!("{label}: retained ")))
            .ok_or(format!("no summary line for {label}"))?;
        let n: usize = line
            .split_whitespace()
            .nth(2)
            .and_then(|s| s.parse().ok())
            .ok_or("bad summary line")?;
        check(n == *total, format!("{label}: retained {n}, expected {total}"))?;
        let slug = harness::method_slug(label.parse::<Method>().map_err(|e| e.to_string())?);
        let cert =
            ScreeningResult::load(dir.path().join(format!("certificate_{slug}.json"))).map_err(|e| e.to_string())?;
        check(
            same_up_to_flip(&retained(&cert), table, &lines),
            format!("{label}: retained sides {:?}", retained(&cert)),
        )?;
        totals.push(format!("{label}={n}"));
    }
    Ok(format!("{} in {elapsed:.2} s", totals.join(" ")))
}

fn criterion_2() -> Outcome {
    let g = five_node();
    let ptdf = build_ptdf(&g).map_err(|e| e.to_string())?;
    let full = ConstraintMask::full(g.num_lines());
    let periods = [
        (vec![0.0, 0.0, 0.0, 55.0, 0.0], 275.0),
        (vec![0.0, 0.0, 0.0, 75.0, 0.0], 575.0),
        (vec![0.0, 0.0, 0.0, 0.0, 69.0], 772.5),
        (vec![0.0, 0.0, 0.0, 58.0, 13.8], 611.0),
    ];
    let mut costs = Vec::new();
    for (t, (d, cost)) in periods.iter().enumerate() {
        let s = solve_uc(&g, &ptdf, d, &full).map_err(|e| e.to_string())?;
        check(
            rel_close(s.cost, *cost, 1e-6),
            format!("t{}: cost {} != {cost}", t + 1, s.cost),
        )?;
        costs.push(format!("{:.4}", s.cost));
        if t == 2 {
            let f = s.flows[g.line_index("l4").unwrap()].abs();
            check((f - 30.0).abs() <= 1e-6, format!("t3: |f_l4| = {f}"))?;
        }
    }
    Ok(format!("costs {} and t3 |f_l4| = 30", costs.join(" / ")))
}

fn criterion_3() -> Outcome {
    let pts: Vec<CostPoint> = [(55.0, 275.0), (75.0, 575.0), (69.0, 772.5)]
        .iter()
        .map(|&(demand, cost)| CostPoint { demand, cost })
        .collect();
    let model = fit_cost_bound(&pts, 1).map_err(|e| e.to_string())?;
    let at = |d: f64| model.evaluate(d).map_err(|e| e.to_string());
    let c72 = at(71.8)?;
    let c55 = at(55.0)?;
    check((c72 - 872.0).abs() <= 0.5, format!("C(71.8) = {c72}"))?;
    check((c55 - 275.0).abs() <= 1e-6, format!("C(55) = {c55}"))?;
    for p in &pts {
        let slack = at(p.demand)? - p.cost;
        check(slack >= -1e-9, format!("slack {slack} at D = {}", p.demand))?;
    }
    Ok(format!("C(71.8) = {c72:.3}, C(55) = {c55:.6}, all slacks >= 0"))
}

fn criterion_4() -> Outcome {
    let g = two_node();
    let ptdf = build_ptdf(&g).map_err(|e| e.to_string())?;
    let set = DemandSet::Box {
        lower: vec![0.0, 80.0],
        upper: vec![0.0, 120.0],
    };
    let bn = screen_line(&g, &ptdf, 0, Side::Upper, &MethodConfig::bn(set.clone())).map_err(|e| e.to_string())?;
    let bn_flow = bn.extreme_flow.ok_or("no BN extreme")?;
    check(
        (bn_flow - 100.0).abs() <= 1e-6 && !bn.removable,
        format!("BN extreme {bn_flow}, removable {}", bn.removable),
    )?;

    let bound = ucscreen::costbound::CostBoundModel::constant(2000.0, 80.0, 120.0);
    let ub = screen_line(&g, &ptdf, 0, Side::Upper, &MethodConfig::ub(set, bound)).map_err(|e| e.to_string())?;
    let ub_flow = ub.extreme_flow.ok_or("no UB extreme")?;
    // Hand LP: max p1 with p1 + p2 = d2 in [80, 120], 50 p1 + 10 p2 <= 2000,
    // p in [0, 100]. Eliminating p2 gives p1 <= min(100, d2, (2000 - 10 d2) / 40),
    // largest at d2 = 80.
    let oracle = (0..=400)
        .map(|k| 80.0 + 0.1 * k as f64)
        .map(|d2| 100.0_f64.min(d2).min((2000.0 - 10.0 * d2) / 40.0))
        .fold(f64::NEG_INFINITY, f64::max);
    check(
        ub_flow < 100.0 && ub.removable,
        format!("UB extreme {ub_flow}, removable {}", ub.removable),
    )?;
    check(
        (ub_flow - oracle).abs() <= 1e-6,
        format!("UB extreme {ub_flow} vs oracle {oracle}"),
    )?;
    Ok(format!(
        "BN extreme {bn_flow} retained, UB extreme {ub_flow} removed (oracle {oracle})"
    ))
}

const N_INSTANCES: u64 = 20;

fn instances() -> Vec<Instance> {
    (0..N_INSTANCES).map(|i| synth_instance(100 + i, 200)).collect()
}

fn criterion_5(all: &[Instance]) -> Outcome {
    let mut points = 0usize;
    let mut min_points = usize::MAX;
    let mut checked = 0usize;
    let mut covered = [0usize; 4];
    for (i, inst) in all.iter().enumerate() {
        // (a) removed sides hold at sampled feasible operating points.
        let mut rng = ChaCha8Rng::seed_from_u64(7_000 + i as u64);
        for m in [Method::Bn, Method::Cc] {
            let cfg = inst.config(m);
            let (_, cert) = inst.outcome.certificates.iter().find(|(k, _)| *k == m).unwrap();
            let removed = cert.removable_set();
            let mut demands = 0;
            for _ in 0..30 {
                if demands == 3 {
                    break;
                }
                let d = cfg.demand_set.sample(&mut rng);
                let sampled = feasible_flows(&inst.grid, &inst.ptdf, &d, 500, &mut rng);
                if sampled.is_empty() {
                    continue;
                }
                demands += 1;
                min_points = min_points.min(sampled.len());
                for flows in sampled {
                    points += 1;
                    for (line, side) in &removed {
                        let l = inst.grid.line_index(line).unwrap();
                        let cap = inst.grid.lines()[l].capacity;
                        let viol = match side {
                            Side::Upper => flows[l] - cap,
                            Side::Lower => -cap - flows[l],
                        };
                        check(
                            viol <= 1e-6,
                            format!(
                                "instance {i}: {m} removed {line} {} but flow {} (cap {cap})",
                                side.name(),
                                flows[l]
                            ),
                        )?;
                    }
                }
            }
            check(
                demands == 3,
                format!("instance {i}: only {demands} feasible demands sampled for {m}"),
            )?;
        }

        // (b) reduced UCs are exact on demands the verdicts cover.
        for (k, m) in Method::ALL.iter().enumerate() {
            let cfg = inst.config(*m);
            for e in inst.outcome.evaluations.iter().filter(|e| e.method == *m) {
                let d = inst.test_demand(&e.period);
                if !membership(&cfg.demand_set, d).map_err(|e| e.to_string())? {
                    continue;
                }
                if let Some(bound) = &cfg.cost_bound {
                    let aggregate: f64 = d.iter().sum();
                    match bound.evaluate(aggregate) {
                        Ok(c) if e.full_cost <= c => {}
                        _ => continue,
                    }
                }
                checked += 1;
                covered[k] += 1;
                check(
                    e.verdict == Verdict::Exact,
                    format!(
                        "instance {i}: {m} period {} is {:?} (full {}, resolved {:?})",
                        e.period, e.verdict, e.full_cost, e.resolved_cost
                    ),
                )?;
            }
        }
    }
    check(points > 0 && checked > 0, "nothing was checked")?;
    Ok(format!(
        "{points} sampled points clean (at least {min_points} per demand); {checked} covered evaluations exact (BN {} UB {} CC {} UB+CC {})",
        covered[0], covered[1], covered[2], covered[3]
    ))
}

fn criterion_6(all: &[Instance]) -> Outcome {
    for (i, inst) in all.iter().enumerate() {
        let set = |m: Method| {
            inst.outcome
                .certificates
                .iter()
                .find(|(k, _)| *k == m)
                .map(|(_, c)| c.removable_set())
                .unwrap()
        };
        let (bn, ub, cc, ubcc) = (set(Method::Bn), set(Method::Ub), set(Method::Cc), set(Method::Ubcc));
        for (a, b, name) in [
            (&bn, &ub, "BN <= UB"),
            (&ub, &ubcc, "UB <= UB+CC"),
            (&bn, &cc, "BN <= CC"),
            (&cc, &ubcc, "CC <= UB+CC"),
        ] {
            check(
                a.is_subset(b),
                format!("instance {i}: {name} fails: {:?}", a.difference(b).collect::<Vec<_>>()),
            )?;
        }
    }
    Ok(format!("all four inclusions hold on {} instances", all.len()))
}

fn random_milp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let sense = if rng.gen_bool(0.5) {
        Sense::Minimize
    } else {
        Sense::Maximize
    };
    let mut lp = LinearProgram::new(sense);
    let n_bin = rng.gen_range(1..=10);
    let n_cont = rng.gen_range(0..=4);
    let mut vars = Vec::new();
    for j in 0..n_bin {
        vars.push(lp.add_binary(format!("y{j}"), rng.gen_range(-10..=10) as f64));
    }
    for j in 0..n_cont {
        let ub = rng.gen_range(1..=10) as f64;
        vars.push(lp.add_var(format!("x{j}"), 0.0, ub, rng.gen_range(-10..=10) as f64 / 2.0));
    }
    for r in 0..rng.gen_range(1..=6) {
        let mut coeffs: Vec<(VarId, f64)> = Vec::new();
        for &v in &vars {
            if rng.gen_bool(0.6) {
                coeffs.push((v, rng.gen_range(-6..=6) as f64));
            }
        }
        let rel = match rng.gen_range(0..10) {
            0 => Relation::Eq,
            1..=5 => Relation::Le,
            _ => Relation::Ge,
        };
        let rhs = rng.gen_range(-8..=12) as f64;
        lp.add_constraint(format!("r{r}"), coeffs, rel, rhs);
    }
    lp
}

/// Best objective over every 0/1 assignment, each solved as an LP.
fn enumerate(lp: &LinearProgram, opts: &SolverOptions) -> Option<f64> {
    let bins: Vec<usize> = (0..lp.num_vars())
        .filter(|&j| lp.variables[j].kind == VarKind::Binary)
        .collect();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut fixed = lp.clone();
        for (k, &j) in bins.iter().enumerate() {
            let v = ((mask >> k) & 1) as f64;
            fixed.set_bounds(VarId(j), v, v);
            fixed.variables[j].kind = VarKind::Continuous;
        }
        let out = solve_lp(&fixed, opts).unwrap();
        if out.status == Status::Optimal {
            let better = match (best, lp.sense) {
                (None, _) => true,
                (Some(b), Sense::Minimize) => out.objective < b,
                (Some(b), Sense::Maximize) => out.objective > b,
            };
            if better {
                best = Some(out.objective);
            }
        }
    }
    best
}

fn criterion_7() -> Outcome {
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut feasible = 0;
    for k in 0..200 {
        let lp = random_milp(&mut rng);
        let oracle = enumerate(&lp, &opts);
        let got = solve_milp(&lp, &opts).map_err(|e| format!("milp {k}: {e}"))?;
        match oracle {
            None => check(
                got.status == Status::Infeasible,
                format!("milp {k}: expected infeasible, got {:?}", got.status),
            )?,
            Some(best) => {
                feasible += 1;
                check(
                    got.status == Status::Optimal,
                    format!("milp {k}: expected optimal, got {:?}", got.status),
                )?;
                check(
                    rel_close(got.objective, best, 1e-6),
                    format!("milp {k}: objective {} vs enumeration {best}", got.objective),
                )?;
                let viol = lp.max_violation(&got.values);
                check(viol <= opts.tol_feas * 10.0, format!("milp {k}: violation {viol}"))?;
                for (v, x) in lp.variables.iter().zip(&got.values) {
                    if v.kind == VarKind::Binary {
                        check(
                            (x - x.round()).abs() <= opts.int_tol,
                            format!("milp {k}: fractional {x}"),
                        )?;
                    }
                }
            }
        }
    }
    Ok(format!("200 MILPs agree with enumeration ({feasible} feasible)"))
}

fn rts24_inputs(periods: usize, n_test: usize) -> Result<ExperimentInputs, String> {
    let grid = Grid::load(fixture("rts24.json")).map_err(|e| e.to_string())?;
    let factors = AllocationFactors::load(fixture("rts24_xi.csv"))
        .and_then(|f| f.aligned_to(grid.buses()))
        .map_err(|e| e.to_string())?;
    let history =
        demandset::generate_history(&factors, periods, (1900.0, 2700.0), 0.05, 1).map_err(|e| e.to_string())?;
    let (train, test) = worst_case_split(&history, n_test).map_err(|e| e.to_string())?;
    Ok(ExperimentInputs { grid, train, test })
}

fn criterion_8() -> Outcome {
    let inputs = rts24_inputs(600, 100)?;
    let out = harness::run_experiment(&inputs, &PipelineSettings::default(), None).map_err(|e| e.to_string())?;
    let r = &out.report;
    let mut parts = Vec::new();
    for m in [Method::Bn, Method::Ub, Method::Cc] {
        let mr = r.method(m).ok_or("missing method")?;
        check(
            mr.n_infeasible == 0 && mr.n_suboptimal == 0,
            format!("{m}: {} infeasible, {} suboptimal", mr.n_infeasible, mr.n_suboptimal),
        )?;
    }
    let ubcc = r.method(Method::Ubcc).ok_or("missing UB+CC")?;
    for m in [Method::Bn, Method::Ub, Method::Cc] {
        let mr = r.method(m).unwrap();
        check(
            ubcc.retained_constraints_pct < mr.retained_constraints_pct,
            format!(
                "UB+CC retains {:.1}% vs {m} {:.1}%",
                ubcc.retained_constraints_pct, mr.retained_constraints_pct
            ),
        )?;
    }
    check(r.n_test > r.n_test_skipped, "every test period was skipped")?;
    for mr in &r.methods {
        parts.push(format!(
            "{} {:.1}% ({} inf, {} sub)",
            mr.method, mr.retained_constraints_pct, mr.n_infeasible, mr.n_suboptimal
        ));
    }
    Ok(format!(
        "{}; {} of {} test periods evaluated",
        parts.join(", "),
        r.n_test - r.n_test_skipped,
        r.n_test
    ))
}

fn clear_timestamps(mut r: harness::TopologyReport) -> harness::TopologyReport {
    r.base.timestamp.clear();
    r.intersection.timestamp.clear();
    r
}

fn criterion_9() -> Outcome {
    let opts = SolverOptions::default();
    let mut runs = 0;

    // Five-node ring, every method, every line out in turn, with the base
    // configuration reused and with the cost bound refitted per variant.
    let g = five_node();
    let h = five_node_history();
    let ptdf = build_ptdf(&g).map_err(|e| e.to_string())?;
    let (points, _) = harness::training_points(&g, &ptdf, &h, &opts).map_err(|e| e.to_string())?;
    let (bound, _) = harness::fit_bound(&points, CostBoundSpec::Segments(1)).map_err(|e| e.to_string())?;
    let box_set = demandset::box_from_history(&h).map_err(|e| e.to_string())?;
    let hull = demandset::hull_from_history(&h, 1.0).map_err(|e| e.to_string())?;
    let settings = PipelineSettings::default();
    let ids: Vec<String> = g.lines().iter().map(|l| l.id.clone()).collect();
    for m in Method::ALL {
        let cfg = harness::method_config(m, &box_set, &hull, Some(&bound), &settings).map_err(|e| e.to_string())?;
        let fixed = topology_experiment(&g, &ids, &cfg, &opts).map_err(|e| e.to_string())?;
        let refit = topology_experiment_refit(&g, &ids, m, &h, &settings).map_err(|e| e.to_string())?;
        for (r, kind) in [(fixed, "fixed"), (refit, "refit")] {
            check(
                r.intersection_removable_fraction <= r.base_removable_fraction,
                format!(
                    "five-node {m} {kind}: intersection {} > base {}",
                    r.intersection_removable_fraction, r.base_removable_fraction
                ),
            )?;
            runs += 1;
        }
    }

    // 24-bus grid, UB+CC refitted per variant, a handful of non-islanding outages.
    let inputs = rts24_inputs(120, 20)?;
    let g = &inputs.grid;
    let ids: Vec<String> = g
        .lines()
        .iter()
        .map(|l| l.id.clone())
        .filter(|id| g.without_line(id).map(|v| v.is_connected()).unwrap_or(false))
        .step_by(6)
        .collect();
    let first =
        topology_experiment_refit(g, &ids, Method::Ubcc, &inputs.train, &settings).map_err(|e| e.to_string())?;
    check(
        first.intersection_removable_fraction <= first.base_removable_fraction,
        format!(
            "rts24: intersection {} > base {}",
            first.intersection_removable_fraction, first.base_removable_fraction
        ),
    )?;
    runs += 1;
    let second =
        topology_experiment_refit(g, &ids, Method::Ubcc, &inputs.train, &settings).map_err(|e| e.to_string())?;
    check(
        serde_json::to_string(&clear_timestamps(first.clone())).unwrap()
            == serde_json::to_string(&clear_timestamps(second)).unwrap(),
        "topology reports differ between identical runs",
    )?;

    // Evaluation reports through the CLI, twice with the same seed.
    let inst = synth_instance(4242, 120);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let grid_path = dir.path().join("grid.json");
    let hist_path = dir.path().join("history.csv");
    inst.grid.save(&grid_path).map_err(|e| e.to_string())?;
    inst.inputs.train.save(&hist_path).map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_ucscreen"))
            .args(["eval", "--test-frac", "0.25", "--seed", "9", "--out"])
            .arg(&out_dir)
            .arg("--grid")
            .arg(&grid_path)
            .arg("--history")
            .arg(&hist_path)
            .output()
            .map_err(|e| e.to_string())?
            .status;
        check(status.success(), format!("eval run {run} exited with {status}"))?;
        let report = parse_report(&out_dir.join("report.json")).map_err(|e| e.to_string())?;
        check(report.timing.is_some(), "report has no timing section")?;
        reports.push(report.deterministic().to_json());
    }
    check(
        reports[0] == reports[1],
        "evaluation reports differ between identical runs",
    )?;

    Ok(format!(
        "{runs} topology runs never raise the removable fraction (rts24 base {:.3}, intersection over {} outages {:.3}); reports deterministic",
        first.base_removable_fraction,
        ids.len(),
        first.intersection_removable_fraction
    ))
}

fn run(n: usize, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    match &result {
        Ok(detail) => println!("criterion {n}: PASS ({secs:.1} s) {detail}"),
        Err(detail) => println!("criterion {n}: FAIL ({secs:.1} s) {detail}"),
    }
    result.is_ok()
}

fn main() {
    let mut ok = true;
    ok &= run(1, criterion_1);
    ok &= run(2, criterion_2);
    ok &= run(3, criterion_3);
    ok &= run(4, criterion_4);
    let start = Instant::now();
    let all = panic::catch_unwind(instances);
    println!(
        "built {N_INSTANCES} synthetic instances in {:.1} s",
        start.elapsed().as_secs_f64()
    );
    match &all {
        Ok(all) => {
            ok &= run(5, || criterion_5(all));
            ok &= run(6, || criterion_6(all));
        }
        Err(_) => {
            println!("criterion 5: FAIL instance construction panicked");
            println!("criterion 6: FAIL instance construction panicked");
            ok = false;
        }
    }
    ok &= run(7, criterion_7);
    ok &= run(8, criterion_8);
    ok &= run(9, criterion_9);
    if !ok {
        std::process::exit(1);
    }
}
