//! Single-period DC unit commitment with PTDF line-flow limits.
//!
//! Variable layout of every model built here: u[g] is `VarId(g)` and p[g] is
//! `VarId(G + g)`. Line-side rows are named `flow_up[l]` and `flow_lo[l]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, GridError, PtdfMatrix};
use crate::solver::{
    self, LinearProgram, Relation, Sense, SolveOutcome, SolverError, SolverOptions, Status, VarId, VarKind,
};

/// PTDF entries below this magnitude are left out of assembled rows.
const PTDF_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum UcError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unit commitment is infeasible")]
    Infeasible,
    #[error("unit commitment is unbounded")]
    Unbounded,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Lower, Side::Upper];

    pub fn index(self) -> usize {
        match self {
            Side::Lower => 0,
            Side::Upper => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Lower => "lower",
            Side::Upper => "upper",
        }
    }
}

/// Net demand per bus for one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandRecord {
    pub label: Option<String>,
    pub demand: Vec<f64>,
}

impl DemandRecord {
    pub fn new(demand: Vec<f64>) -> Self {
        Self { label: None, demand }
    }

    pub fn labeled(label: impl Into<String>, demand: Vec<f64>) -> Self {
        Self {
            label: Some(label.into()),
            demand,
        }
    }

    pub fn aggregate(&self) -> f64 {
        self.demand.iter().sum()
    }
}

/// Keep/remove flag per (line, side).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintMask {
    keep: Vec<[bool; 2]>,
}

impl ConstraintMask {
    pub fn full(n_lines: usize) -> Self {
        Self {
            keep: vec![[true; 2]; n_lines],
        }
    }

    pub fn empty(n_lines: usize) -> Self {
        Self {
            keep: vec![[false; 2]; n_lines],
        }
    }

    pub fn num_lines(&self) -> usize {
        self.keep.len()
    }

    pub fn keeps(&self, line: usize, side: Side) -> bool {
        self.keep[line][side.index()]
    }

    pub fn set(&mut self, line: usize, side: Side, keep: bool) {
        self.keep[line][side.index()] = keep;
    }

    pub fn num_kept(&self) -> usize {
        self.keep.iter().flatten().filter(|&&k| k).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcSolution {
    pub commitment: Vec<bool>,
    pub dispatch: Vec<f64>,
    pub injections: Vec<f64>,
    pub flows: Vec<f64>,
    pub cost: f64,
}

impl UcSolution {
    /// Recompute injections, flows and cost from a dispatch.
    pub fn from_dispatch(
        grid: &Grid,
        ptdf: &PtdfMatrix,
        demand: &[f64],
        commitment: Vec<bool>,
        dispatch: Vec<f64>,
    ) -> Result<Self, UcError> {
        let injections = grid.injections(&dispatch, demand);
        let flows = ptdf.line_flows(&injections)?;
        let cost = grid.generators().iter().zip(&dispatch).map(|(g, p)| g.cost * p).sum();
        Ok(Self {
            commitment,
            dispatch,
            injections,
            flows,
            cost,
        })
    }

    /// Largest violation of the solution's own invariants over the kept
    /// line sides.
    pub fn max_violation(&self, grid: &Grid, mask: &ConstraintMask) -> f64 {
        let mut worst = 0.0_f64;
        for ((g, &p), &u) in grid.generators().iter().zip(&self.dispatch).zip(&self.commitment) {
            let u = if u { 1.0 } else { 0.0 };
            worst = worst.max(u * g.pmin - p).max(p - u * g.pmax);
        }
        worst = worst.max(self.injections.iter().sum::<f64>().abs());
        for (l, (line, &f)) in grid.lines().iter().zip(&self.flows).enumerate() {
            if mask.keeps(l, Side::Upper) {
                worst = worst.max(f - line.capacity);
            }
            if mask.keeps(l, Side::Lower) {
                worst = worst.max(-line.capacity - f);
            }
        }
        worst
    }

    pub fn committed(&self) -> usize {
        self.commitment.iter().filter(|&&u| u).count()
    }
}

fn check_dims(grid: &Grid, ptdf: &PtdfMatrix, demand: &[f64]) -> Result<(), UcError> {
    if demand.len() != grid.num_buses() {
        return Err(UcError::DimensionMismatch {
            expected: grid.num_buses(),
            got: demand.len(),
        });
    }
    if ptdf.num_buses() != grid.num_buses() || ptdf.num_lines() != grid.num_lines() {
        return Err(UcError::DimensionMismatch {
            expected: grid.num_lines(),
            got: ptdf.num_lines(),
        });
    }
    Ok(())
}

/// UC model with only the line sides kept by `mask`.
pub fn build_uc(
    grid: &Grid,
    ptdf: &PtdfMatrix,
    demand: &[f64],
    mask: &ConstraintMask,
) -> Result<LinearProgram, UcError> {
    check_dims(grid, ptdf, demand)?;
    if mask.num_lines() != grid.num_lines() {
        return Err(UcError::DimensionMismatch {
            expected: grid.num_lines(),
            got: mask.num_lines(),
        });
    }
    let gens = grid.generators();
    let mut lp = LinearProgram::new(Sense::Minimize);
    let u: Vec<VarId> = gens
        .iter()
        .map(|g| lp.add_binary(format!("u[{}]", g.id), 0.0))
        .collect();
    let p: Vec<VarId> = gens
        .iter()
        .map(|g| lp.add_var(format!("p[{}]", g.id), 0.0, g.pmax, g.cost))
        .collect();

    let total: f64 = demand.iter().sum();
    lp.add_constraint("balance", p.iter().map(|&v| (v, 1.0)).collect(), Relation::Eq, total);
    for (k, g) in gens.iter().enumerate() {
        lp.add_constraint(
            format!("pmax[{}]", g.id),
            vec![(p[k], 1.0), (u[k], -g.pmax)],
            Relation::Le,
            0.0,
        );
        lp.add_constraint(
            format!("pmin[{}]", g.id),
            vec![(p[k], 1.0), (u[k], -g.pmin)],
            Relation::Ge,
            0.0,
        );
    }

    for (l, line) in grid.lines().iter().enumerate() {
        let row = ptdf.row(l);
        let coeffs: Vec<(VarId, f64)> = (0..gens.len())
            .map(|k| (p[k], row[grid.generator_bus(k)]))
            .filter(|(_, a)| a.abs() > PTDF_EPS)
            .collect();
        // f_l = sum_g a p_g - sum_n a d_n
        let shift: f64 = row.iter().zip(demand).map(|(a, d)| a * d).sum();
        if mask.keeps(l, Side::Upper) {
            lp.add_constraint(
                format!("flow_up[{}]", line.id),
                coeffs.clone(),
                Relation::Le,
                line.capacity + shift,
            );
        }
        if mask.keeps(l, Side::Lower) {
            lp.add_constraint(
                format!("flow_lo[{}]", line.id),
                coeffs,
                Relation::Ge,
                -line.capacity + shift,
            );
        }
    }
    Ok(lp)
}

pub fn build_full_uc(grid: &Grid, ptdf: &PtdfMatrix, demand: &[f64]) -> Result<LinearProgram, UcError> {
    build_uc(grid, ptdf, demand, &ConstraintMask::full(grid.num_lines()))
}

fn extract(grid: &Grid, ptdf: &PtdfMatrix, demand: &[f64], out: &SolveOutcome) -> Result<UcSolution, UcError> {
    let n_gen = grid.num_generators();
    let commitment = out.values[..n_gen].iter().map(|&u| u > 0.5).collect();
    let dispatch = out.values[n_gen..2 * n_gen].to_vec();
    UcSolution::from_dispatch(grid, ptdf, demand, commitment, dispatch)
}

pub fn solve_uc(grid: &Grid, ptdf: &PtdfMatrix, demand: &[f64], mask: &ConstraintMask) -> Result<UcSolution, UcError> {
    solve_uc_with(grid, ptdf, demand, mask, &SolverOptions::default())
}

pub fn solve_uc_with(
    grid: &Grid,
    ptdf: &PtdfMatrix,
    demand: &[f64],
    mask: &ConstraintMask,
    opts: &SolverOptions,
) -> Result<UcSolution, UcError> {
    let lp = build_uc(grid, ptdf, demand, mask)?;
    let out = solver::solve(&lp, opts)?;
    match out.status {
        Status::Optimal => extract(grid, ptdf, demand, &out),
        Status::Infeasible => Err(UcError::Infeasible),
        Status::Unbounded => Err(UcError::Unbounded),
    }
}

/// Full model (every line side) with the commitment fixed; a pure LP.
pub fn fix_and_resolve(
    grid: &Grid,
    ptdf: &PtdfMatrix,
    demand: &[f64],
    commitment: &[bool],
) -> Result<SolveOutcome, UcError> {
    fix_and_resolve_with(grid, ptdf, demand, commitment, &SolverOptions::default())
}

pub fn fix_and_resolve_with(
    grid: &Grid,
    ptdf: &PtdfMatrix,
    demand: &[f64],
    commitment: &[bool],
    opts: &SolverOptions,
) -> Result<SolveOutcome, UcError> {
    if commitment.len() != grid.num_generators() {
        return Err(UcError::DimensionMismatch {
            expected: grid.num_generators(),
            got: commitment.len(),
        });
    }
    let mut lp = build_full_uc(grid, ptdf, demand)?;
    for (g, &on) in commitment.iter().enumerate() {
        let v = if on { 1.0 } else { 0.0 };
        lp.set_bounds(VarId(g), v, v);
        lp.variables[g].kind = VarKind::Continuous;
    }
    Ok(solver::solve_lp(&lp, opts)?)
}
