#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ucscreen::demandset::{self, DemandHistory, DemandSet};
use ucscreen::grid::{build_ptdf, Grid, PtdfMatrix};
use ucscreen::harness::{self, random_split, ExperimentInputs, PipelineOutcome, PipelineSettings};
use ucscreen::screening::{Method, MethodConfig};
use ucscreen::solver::{solve_lp, SolverOptions, Status, VarId, VarKind};
use ucscreen::synth::random_system;
use ucscreen::uc::{build_full_uc, solve_uc, ConstraintMask, UcSolution};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn five_node() -> Grid {
    Grid::load(fixture("five_node.json")).unwrap()
}

pub fn five_node_history() -> DemandHistory {
    DemandHistory::load(fixture("five_node_history.csv")).unwrap()
}

pub fn five_node_test() -> DemandHistory {
    DemandHistory::load(fixture("five_node_test.csv")).unwrap()
}

pub fn two_node() -> Grid {
    Grid::load(fixture("two_node.json")).unwrap()
}

/// A random grid run through the whole pipeline. The test set holds the
/// held-out periods plus demands drawn from the training box and hull.
pub struct Instance {
    pub grid: Grid,
    pub ptdf: PtdfMatrix,
    pub inputs: ExperimentInputs,
    pub box_set: DemandSet,
    pub hull: DemandSet,
    pub outcome: PipelineOutcome,
    pub settings: PipelineSettings,
}

impl Instance {
    pub fn config(&self, m: Method) -> MethodConfig {
        harness::method_config(
            m,
            &self.box_set,
            &self.hull,
            self.outcome.cost_bound.as_ref(),
            &self.settings,
        )
        .unwrap()
    }

    pub fn test_demand(&self, label: &str) -> &[f64] {
        let t = self.inputs.test.labels().iter().position(|l| l == label).unwrap();
        self.inputs.test.row(t)
    }
}

pub fn synth_instance(seed: u64, periods: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_buses = rng.gen_range(5..=10);
    let n_gens = rng.gen_range(3..=6);
    let sys = random_system(&mut rng, n_buses, n_gens);
    let history = demandset::generate_history(&sys.factors, periods, sys.load_range, 0.15, seed).unwrap();
    let (train, held_out) = random_split(&history, 0.2, seed).unwrap();

    let box_set = demandset::box_from_history(&train).unwrap();
    let hull = demandset::hull_from_history(&train, 1.0).unwrap();
    let mut labels = held_out.labels().to_vec();
    let mut rows = held_out.rows().to_vec();
    for k in 0..10 {
        labels.push(format!("hull{k}"));
        rows.push(hull.sample(&mut rng));
        labels.push(format!("box{k}"));
        rows.push(box_set.sample(&mut rng));
    }
    let test = DemandHistory::new(history.buses().to_vec(), labels, rows).unwrap();

    let inputs = ExperimentInputs {
        grid: sys.grid.clone(),
        train,
        test,
    };
    let settings = PipelineSettings::default();
    let outcome = harness::run_experiment(&inputs, &settings, None).unwrap();
    Instance {
        ptdf: build_ptdf(&sys.grid).unwrap(),
        grid: sys.grid,
        inputs,
        box_set,
        hull,
        outcome,
        settings,
    }
}

/// Feasible full-UC operating points for demand `d`: commitments perturbed
/// from the optimal one, each with a random linear objective over the
/// dispatch. Returns line flows; empty when the UC is infeasible at `d`.
pub fn feasible_flows<R: Rng>(grid: &Grid, ptdf: &PtdfMatrix, d: &[f64], n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let full = ConstraintMask::full(grid.num_lines());
    let Ok(best) = solve_uc(grid, ptdf, d, &full) else {
        return Vec::new();
    };
    let base = build_full_uc(grid, ptdf, d).unwrap();
    let n_gen = grid.num_generators();
    let opts = SolverOptions::default();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < 20 * n {
        attempts += 1;
        let mut lp = base.clone();
        let commitment: Vec<bool> = best.commitment.iter().map(|&u| u ^ rng.gen_bool(0.25)).collect();
        for (g, &u) in commitment.iter().enumerate() {
            let v = if u { 1.0 } else { 0.0 };
            lp.set_bounds(VarId(g), v, v);
            lp.variables[g].kind = VarKind::Continuous;
            lp.objective[g] = 0.0;
            lp.objective[n_gen + g] = rng.gen_range(-1.0..1.0);
        }
        let sol = solve_lp(&lp, &opts).unwrap();
        if sol.status != Status::Optimal {
            continue;
        }
        let p = sol.values[n_gen..2 * n_gen].to_vec();
        let s = UcSolution::from_dispatch(grid, ptdf, d, commitment, p).unwrap();
        out.push(s.flows);
    }
    out
}
