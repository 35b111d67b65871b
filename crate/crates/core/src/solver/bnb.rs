//! Best-bound branch and bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::solve_relaxation;
use super::{LinearProgram, SolveOutcome, SolverError, SolverOptions, Status, VarKind};

struct Node {
    /// Parent relaxation value in the internal minimization sense.
    bound: f64,
    id: usize,
    depth: usize,
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

pub fn solve_milp(lp: &LinearProgram, opts: &SolverOptions) -> Result<SolveOutcome, SolverError> {
    lp.validate()?;
    let sign = lp.sense.sign();
    let binaries: Vec<usize> = lp
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        id: 0,
        depth: 0,
        fixings: Vec::new(),
    });
    let mut next_id = 1;
    let mut nodes = 0usize;
    let mut iterations = 0usize;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut work = lp.clone();

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - opts.mip_gap * best.abs().max(1.0) {
                // Best-bound order: every remaining node is at least as bad.
                break;
            }
        }
        nodes += 1;
        if nodes > opts.node_limit || node.depth > opts.depth_limit {
            return Err(SolverError::NodeBudgetExceeded { limit: opts.node_limit });
        }

        for (j, v) in lp.variables.iter().enumerate() {
            work.variables[j].lower = v.lower;
            work.variables[j].upper = v.upper;
        }
        for &(j, val) in &node.fixings {
            work.variables[j].lower = val;
            work.variables[j].upper = val;
        }
        let relax = solve_relaxation(&work, opts)?;
        iterations += relax.iterations;
        match relax.status {
            Status::Infeasible => continue,
            Status::Unbounded => {
                let mut out = SolveOutcome::unbounded(lp.sense, iterations);
                out.nodes = nodes;
                return Ok(out);
            }
            Status::Optimal => {}
        }
        let value = sign * relax.objective;
        if let Some((best, _)) = &incumbent {
            if value >= best - opts.mip_gap * best.abs().max(1.0) {
                continue;
            }
        }

        // Most fractional binary, lowest index on ties.
        let mut branch: Option<(usize, f64)> = None;
        for &j in &binaries {
            let x = relax.values[j];
            let frac = (x - x.floor()).min(x.ceil() - x);
            if frac > opts.int_tol && branch.map_or(true, |(_, f)| frac > f + 1e-12) {
                branch = Some((j, frac));
            }
        }
        match branch {
            None => {
                let mut values = relax.values;
                for &j in &binaries {
                    values[j] = values[j].round();
                }
                incumbent = Some((value, values));
            }
            Some((j, _)) => {
                for val in [0.0, 1.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, val));
                    heap.push(Node {
                        bound: value,
                        id: next_id,
                        depth: node.depth + 1,
                        fixings,
                    });
                    next_id += 1;
                }
            }
        }
    }

    match incumbent {
        Some((_, values)) => Ok(SolveOutcome {
            status: Status::Optimal,
            objective: lp.evaluate(&values),
            values,
            duals: None,
            reduced_costs: None,
            iterations,
            nodes,
        }),
        None => {
            let mut out = SolveOutcome::infeasible(iterations);
            out.nodes = nodes;
            Ok(out)
        }
    }
}
