//! Linear and mixed-integer linear programming.
//!
//! Models are assembled row by row into a [`LinearProgram`] and handed to
//! [`solve_lp`] (bounded-variable revised simplex) or [`solve_milp`]
//! (best-bound branch and bound over binary variables).

mod bnb;
mod lp_format;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bnb::solve_milp;
pub use simplex::solve_lp;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("model has integer variables; use solve_milp")]
    IntegerVariables,
    #[error("numerical breakdown after {iterations} simplex iterations: {reason}")]
    NumericalBreakdown { iterations: usize, reason: String },
    #[error("branch-and-bound node budget of {limit} exceeded")]
    NodeBudgetExceeded { limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    /// Factor turning the user objective into an internal minimization.
    pub(crate) fn sign(self) -> f64 {
        match self {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Sparse row: (variable index, coefficient). Duplicate indices are summed.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            objective: Vec::new(),
            variables: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.push_var(name.into(), lower, upper, cost, VarKind::Continuous)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> VarId {
        self.push_var(name.into(), 0.0, 1.0, cost, VarKind::Binary)
    }

    fn push_var(&mut self, name: String, lower: f64, upper: f64, cost: f64, kind: VarKind) -> VarId {
        self.variables.push(Variable {
            name,
            lower,
            upper,
            kind,
        });
        self.objective.push(cost);
        VarId(self.variables.len() - 1)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs: coeffs.into_iter().map(|(v, a)| (v.0, a)).collect(),
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.variables[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn has_integers(&self) -> bool {
        self.variables.iter().any(|v| v.kind == VarKind::Binary)
    }

    /// Constraints whose name starts with `prefix`.
    pub fn count_constraints_with_prefix(&self, prefix: &str) -> usize {
        self.constraints.iter().filter(|c| c.name.starts_with(prefix)).count()
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    /// Objective value of `x` in the model's own sense.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &xv) in self.variables.iter().zip(x) {
            worst = worst.max(v.lower - xv).max(xv - v.upper);
        }
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let viol = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.objective.len() != self.variables.len() {
            return Err(SolverError::InvalidModel(
                "objective length differs from variable count".into(),
            ));
        }
        for (j, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(SolverError::InvalidModel(format!(
                    "variable {} has bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(SolverError::InvalidModel(format!(
                    "variable {} has an empty domain",
                    v.name
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(SolverError::InvalidModel(format!(
                    "binary variable {} has bounds outside [0, 1]",
                    v.name
                )));
            }
            if !self.objective[j].is_finite() {
                return Err(SolverError::InvalidModel(format!(
                    "objective coefficient of {} is not finite",
                    v.name
                )));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(SolverError::InvalidModel(format!(
                    "constraint {} has non-finite rhs",
                    c.name
                )));
            }
            for &(j, a) in &c.coeffs {
                if j >= self.variables.len() {
                    return Err(SolverError::InvalidModel(format!(
                        "constraint {} references unknown variable {}",
                        c.name, j
                    )));
                }
                if !a.is_finite() {
                    return Err(SolverError::InvalidModel(format!(
                        "constraint {} has a non-finite coefficient",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: Status,
    /// Objective in the model's sense; NaN when infeasible, +-inf when unbounded.
    pub objective: f64,
    /// Primal values, empty unless optimal.
    pub values: Vec<f64>,
    /// Sensitivity of the optimal objective to each row's right-hand side.
    /// Only produced for pure LPs.
    pub duals: Option<Vec<f64>>,
    /// Reduced costs of the structural variables, in the model's sense.
    pub reduced_costs: Option<Vec<f64>>,
    pub iterations: usize,
    pub nodes: usize,
}

impl SolveOutcome {
    pub(crate) fn infeasible(iterations: usize) -> Self {
        Self {
            status: Status::Infeasible,
            objective: f64::NAN,
            values: Vec::new(),
            duals: None,
            reduced_costs: None,
            iterations,
            nodes: 0,
        }
    }

    pub(crate) fn unbounded(sense: Sense, iterations: usize) -> Self {
        Self {
            status: Status::Unbounded,
            objective: -sense.sign() * f64::INFINITY,
            values: Vec::new(),
            duals: None,
            reduced_costs: None,
            iterations,
            nodes: 0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol_feas: f64,
    pub tol_opt: f64,
    /// Simplex iteration cap; `None` scales with model size.
    pub max_iterations: Option<usize>,
    /// Relative optimality gap for branch and bound.
    pub mip_gap: f64,
    pub int_tol: f64,
    pub node_limit: usize,
    pub depth_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_feas: 1e-7,
            tol_opt: 1e-7,
            max_iterations: None,
            mip_gap: 1e-6,
            int_tol: 1e-6,
            node_limit: 200_000,
            depth_limit: 10_000,
        }
    }
}

/// Solve with [`solve_milp`] when the model has binaries, [`solve_lp`] otherwise.
pub fn solve(lp: &LinearProgram, opts: &SolverOptions) -> Result<SolveOutcome, SolverError> {
    if lp.has_integers() {
        solve_milp(lp, opts)
    } else {
        solve_lp(lp, opts)
    }
}
