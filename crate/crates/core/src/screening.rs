//! Per-line bounding problems and removability verdicts.
//!
//! For line l' and a side, the bounding model maximises (upper) or minimises
//! (lower) the flow on l' over the LP relaxation of the commitment problem,
//! with demand free to move inside a demand set and, optionally, total cost
//! capped by a demand-dependent budget.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::costbound::CostBoundModel;
use crate::demandset::DemandSet;
use crate::grid::{Grid, PtdfMatrix};
use crate::solver::{self, LinearProgram, Relation, Sense, SolverError, SolverOptions, Status, VarId};
use crate::uc::{ConstraintMask, Side};

/// Removal requires the extreme flow to clear the limit by this much (MW).
pub const REMOVAL_TOL: f64 = 1e-6;
const PTDF_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ScreeningError {
    #[error("configuration does not match method: {0}")]
    ConfigMismatch(String),
    #[error("unknown line `{0}`")]
    UnknownLine(String),
    #[error("line sets differ between screening results")]
    LineSetMismatch,
    #[error("nothing to intersect")]
    EmptyIntersection,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bn,
    Ub,
    Cc,
    Ubcc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Bn, Method::Ub, Method::Cc, Method::Ubcc];

    pub fn uses_hull(self) -> bool {
        matches!(self, Method::Cc | Method::Ubcc)
    }

    pub fn uses_bound(self) -> bool {
        matches!(self, Method::Ub | Method::Ubcc)
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Bn => "BN",
            Method::Ub => "UB",
            Method::Cc => "CC",
            Method::Ubcc => "UB+CC",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "bn" => Ok(Method::Bn),
            "ub" => Ok(Method::Ub),
            "cc" => Ok(Method::Cc),
            "ubcc" | "ub+cc" => Ok(Method::Ubcc),
            other => Err(format!("unknown method `{other}` (expected bn, ub, cc or ubcc)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    pub demand_set: DemandSet,
    pub cost_bound: Option<CostBoundModel>,
    pub enforce_other_lines: bool,
}

impl MethodConfig {
    pub fn new(method: Method, demand_set: DemandSet, cost_bound: Option<CostBoundModel>) -> Self {
        Self {
            method,
            demand_set,
            cost_bound,
            enforce_other_lines: true,
        }
    }

    pub fn bn(demand_set: DemandSet) -> Self {
        Self::new(Method::Bn, demand_set, None)
    }

    pub fn ub(demand_set: DemandSet, bound: CostBoundModel) -> Self {
        Self::new(Method::Ub, demand_set, Some(bound))
    }

    pub fn cc(hull: DemandSet) -> Self {
        Self::new(Method::Cc, hull, None)
    }

    pub fn ubcc(hull: DemandSet, bound: CostBoundModel) -> Self {
        Self::new(Method::Ubcc, hull, Some(bound))
    }

    pub fn validate(&self, grid: &Grid) -> Result<(), ScreeningError> {
        let hull = matches!(self.demand_set, DemandSet::ConvexHull { .. });
        if hull != self.method.uses_hull() {
            return Err(ScreeningError::ConfigMismatch(format!(
                "{} cannot use a {} demand set",
                self.method,
                self.demand_set.kind_name()
            )));
        }
        if self.cost_bound.is_some() != self.method.uses_bound() {
            return Err(ScreeningError::ConfigMismatch(format!(
                "{} {} a cost bound",
                self.method,
                if self.method.uses_bound() {
                    "requires"
                } else {
                    "does not take"
                }
            )));
        }
        if self.demand_set.dimension() != grid.num_buses() {
            return Err(ScreeningError::ConfigMismatch(format!(
                "demand set has {} buses, grid has {}",
                self.demand_set.dimension(),
                grid.num_buses()
            )));
        }
        if let Some(model) = &self.cost_bound {
            if model.segments.is_empty() {
                return Err(ScreeningError::ConfigMismatch("cost bound has no segments".into()));
            }
            for s in &model.segments {
                if !(s.upper >= s.lower) || !s.intercept.is_finite() || !s.slope.is_finite() {
                    return Err(ScreeningError::ConfigMismatch("malformed cost-bound segment".into()));
                }
            }
            if model.segments.windows(2).any(|w| w[0].upper != w[1].lower) {
                return Err(ScreeningError::ConfigMismatch(
                    "cost-bound segments are not contiguous".into(),
                ));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the serialized configuration.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Error,
    /// The line is switched out in this grid variant.
    OutOfService,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningBound {
    pub line: String,
    pub side: Side,
    pub capacity: f64,
    /// `None` unless the bounding problem was solved to optimality.
    pub extreme_flow: Option<f64>,
    pub removable: bool,
    pub status: BoundStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

fn removable(side: Side, extreme: f64, capacity: f64) -> bool {
    match side {
        Side::Upper => extreme < capacity - REMOVAL_TOL,
        Side::Lower => extreme > -capacity + REMOVAL_TOL,
    }
}

/// Screening certificate: one bound per (line, side), lines in grid order,
/// lower side first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningResult {
    pub method: String,
    pub config_digest: String,
    pub timestamp: String,
    pub bounds: Vec<ScreeningBound>,
}

impl ScreeningResult {
    pub fn num_lines(&self) -> usize {
        self.bounds.len() / 2
    }

    pub fn get(&self, line: &str, side: Side) -> Option<&ScreeningBound> {
        self.bounds.iter().find(|b| b.line == line && b.side == side)
    }

    pub fn num_removable(&self) -> usize {
        self.bounds.iter().filter(|b| b.removable).count()
    }

    pub fn num_retained(&self) -> usize {
        self.bounds.len() - self.num_removable()
    }

    pub fn retained_pct(&self) -> f64 {
        if self.bounds.is_empty() {
            return 0.0;
        }
        100.0 * self.num_retained() as f64 / self.bounds.len() as f64
    }

    pub fn removable_fraction(&self) -> f64 {
        if self.bounds.is_empty() {
            return 0.0;
        }
        self.num_removable() as f64 / self.bounds.len() as f64
    }

    /// Sides that were not solved cleanly.
    pub fn flagged(&self) -> Vec<&ScreeningBound> {
        self.bounds
            .iter()
            .filter(|b| {
                matches!(
                    b.status,
                    BoundStatus::Infeasible | BoundStatus::Unbounded | BoundStatus::Error
                )
            })
            .collect()
    }

    pub fn removable_set(&self) -> BTreeSet<(String, Side)> {
        self.bounds
            .iter()
            .filter(|b| b.removable)
            .map(|b| (b.line.clone(), b.side))
            .collect()
    }

    /// Retained sides per line, in line order.
    pub fn retained_by_line(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for b in &self.bounds {
            if out.last().map_or(true, |(id, _)| *id != b.line) {
                out.push((b.line.clone(), 0));
            }
            if !b.removable {
                out.last_mut().expect("pushed above").1 += 1;
            }
        }
        out
    }

    /// Keep mask for the reduced UC on `grid`.
    pub fn mask(&self, grid: &Grid) -> Result<ConstraintMask, ScreeningError> {
        let mut mask = ConstraintMask::full(grid.num_lines());
        for b in &self.bounds {
            let l = grid
                .line_index(&b.line)
                .ok_or_else(|| ScreeningError::UnknownLine(b.line.clone()))?;
            mask.set(l, b.side, !b.removable);
        }
        Ok(mask)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScreeningError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScreeningError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

fn timestamp() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    format!("unix:{secs}")
}

/// Flow on line `l` as coefficients on (p, d): f = sum_g a p_g - sum_n a d_n.
fn flow_terms(grid: &Grid, ptdf: &PtdfMatrix, l: usize, p: &[VarId], d: &[VarId]) -> Vec<(VarId, f64)> {
    let row = ptdf.row(l);
    let mut terms: Vec<(VarId, f64)> = p
        .iter()
        .enumerate()
        .map(|(g, &v)| (v, row[grid.generator_bus(g)]))
        .collect();
    terms.extend(d.iter().zip(row).map(|(&v, &a)| (v, -a)));
    terms.retain(|(_, a)| a.abs() > PTDF_EPS);
    terms
}

pub fn build_bounding_model(
    grid: &Grid,
    ptdf: &PtdfMatrix,
    line: usize,
    side: Side,
    config: &MethodConfig,
) -> Result<LinearProgram, ScreeningError> {
    config.validate(grid)?;
    if line >= grid.num_lines() {
        return Err(ScreeningError::UnknownLine(line.to_string()));
    }
    let sense = match side {
        Side::Upper => Sense::Maximize,
        Side::Lower => Sense::Minimize,
    };
    let mut lp = LinearProgram::new(sense);
    // With 0 <= u <= 1, pmin*u <= p <= pmax*u projects onto 0 <= p <= pmax.
    let p: Vec<VarId> = grid
        .generators()
        .iter()
        .map(|g| lp.add_var(format!("p[{}]", g.id), 0.0, g.pmax, 0.0))
        .collect();
    let d = config.demand_set.attach(&mut lp);

    let mut balance: Vec<(VarId, f64)> = p.iter().map(|&v| (v, 1.0)).collect();
    balance.extend(d.iter().map(|&v| (v, -1.0)));
    lp.add_constraint("balance", balance, Relation::Eq, 0.0);

    for (v, a) in flow_terms(grid, ptdf, line, &p, &d) {
        lp.objective[v.0] = a;
    }

    if config.enforce_other_lines {
        for (l, ln) in grid.lines().iter().enumerate() {
            if l == line {
                continue;
            }
            let terms = flow_terms(grid, ptdf, l, &p, &d);
            lp.add_constraint(format!("flow_up[{}]", ln.id), terms.clone(), Relation::Le, ln.capacity);
            lp.add_constraint(format!("flow_lo[{}]", ln.id), terms, Relation::Ge, -ln.capacity);
        }
    }

    if let Some(model) = &config.cost_bound {
        let mut cost: Vec<(VarId, f64)> = p
            .iter()
            .zip(grid.generators())
            .filter(|(_, g)| g.cost != 0.0)
            .map(|(&v, g)| (v, g.cost))
            .collect();
        let total_d: Vec<(VarId, f64)> = d.iter().map(|&v| (v, 1.0)).collect();
        if let [seg] = model.segments.as_slice() {
            // y = 1 and z = D: sum c p - nu D <= rho with D inside the segment.
            if seg.slope != 0.0 {
                cost.extend(d.iter().map(|&v| (v, -seg.slope)));
            }
            lp.add_constraint("cost_budget", cost, Relation::Le, seg.intercept);
            lp.add_constraint("budget_range_lo", total_d.clone(), Relation::Ge, seg.lower);
            lp.add_constraint("budget_range_hi", total_d, Relation::Le, seg.upper);
        } else {
            let mut ys = Vec::new();
            let mut zs = Vec::new();
            for (s, seg) in model.segments.iter().enumerate() {
                let y = lp.add_binary(format!("y[{s}]"), 0.0);
                let z = lp.add_var(format!("z[{s}]"), f64::NEG_INFINITY, f64::INFINITY, 0.0);
                lp.add_constraint(format!("z_hi[{s}]"), vec![(z, 1.0), (y, -seg.upper)], Relation::Le, 0.0);
                lp.add_constraint(format!("z_lo[{s}]"), vec![(z, 1.0), (y, -seg.lower)], Relation::Ge, 0.0);
                cost.push((y, -seg.intercept));
                cost.push((z, -seg.slope));
                ys.push(y);
                zs.push(z);
            }
            lp.add_constraint("cost_budget", cost, Relation::Le, 0.0);
            let mut link: Vec<(VarId, f64)> = zs.iter().map(|&z| (z, 1.0)).collect();
            link.extend(d.iter().map(|&v| (v, -1.0)));
            lp.add_constraint("segment_demand", link, Relation::Eq, 0.0);
            lp.add_constraint(
                "segment_choice",
                ys.iter().map(|&y| (y, 1.0)).collect(),
                Relation::Eq,
                1.0,
            );
        }
    }
    Ok(lp)
}

pub fn screen_line(
    grid: &Grid,
    ptdf: &PtdfMatrix,
    line: usize,
    side: Side,
    config: &MethodConfig,
) -> Result<ScreeningBound, ScreeningError> {
    screen_line_with(grid, ptdf, line, side, config, &SolverOptions::default())
}

pub fn screen_line_with(
    grid: &Grid,
    ptdf: &PtdfMatrix,
    line: usize,
    side: Side,
    config: &MethodConfig,
    opts: &SolverOptions,
) -> Result<ScreeningBound, ScreeningError> {
    let lp = build_bounding_model(grid, ptdf, line, side, config)?;
    let ln = &grid.lines()[line];
    let mut bound = ScreeningBound {
        line: ln.id.clone(),
        side,
        capacity: ln.capacity,
        extreme_flow: None,
        removable: false,
        status: BoundStatus::Error,
        message: None,
    };
    let out = solver::solve(&lp, opts)?;
    match out.status {
        Status::Optimal => {
            bound.extreme_flow = Some(out.objective);
            bound.removable = removable(side, out.objective, ln.capacity);
            bound.status = BoundStatus::Optimal;
        }
        Status::Unbounded => bound.status = BoundStatus::Unbounded,
        Status::Infeasible => bound.status = BoundStatus::Infeasible,
    }
    Ok(bound)
}

/// Every (line, side) in parallel. A side whose solve fails is kept and
/// flagged rather than dropped.
pub fn screen_all(grid: &Grid, ptdf: &PtdfMatrix, config: &MethodConfig) -> Result<ScreeningResult, ScreeningError> {
    screen_all_with(grid, ptdf, config, &SolverOptions::default())
}

pub fn screen_all_with(
    grid: &Grid,
    ptdf: &PtdfMatrix,
    config: &MethodConfig,
    opts: &SolverOptions,
) -> Result<ScreeningResult, ScreeningError> {
    config.validate(grid)?;
    let tasks: Vec<(usize, Side)> = (0..grid.num_lines())
        .flat_map(|l| Side::BOTH.into_iter().map(move |s| (l, s)))
        .collect();
    let bounds: Vec<ScreeningBound> = tasks
        .par_iter()
        .map(|&(l, side)| {
            screen_line_with(grid, ptdf, l, side, config, opts).unwrap_or_else(|e| {
                let ln = &grid.lines()[l];
                ScreeningBound {
                    line: ln.id.clone(),
                    side,
                    capacity: ln.capacity,
                    extreme_flow: None,
                    removable: false,
                    status: BoundStatus::Error,
                    message: Some(e.to_string()),
                }
            })
        })
        .collect();
    Ok(ScreeningResult {
        method: config.method.label().to_string(),
        config_digest: config.digest(),
        timestamp: timestamp(),
        bounds,
    })
}

/// A side is removable only if every input says so. Extreme flows take the
/// outermost value.
pub fn intersect(results: &[ScreeningResult]) -> Result<ScreeningResult, ScreeningError> {
    let (first, rest) = results.split_first().ok_or(ScreeningError::EmptyIntersection)?;
    let mut out = first.clone();
    for r in rest {
        if r.bounds.len() != out.bounds.len() {
            return Err(ScreeningError::LineSetMismatch);
        }
        for (acc, b) in out.bounds.iter_mut().zip(&r.bounds) {
            if acc.line != b.line || acc.side != b.side {
                return Err(ScreeningError::LineSetMismatch);
            }
            acc.removable &= b.removable;
            acc.extreme_flow = match (acc.extreme_flow, b.extreme_flow, acc.side) {
                (Some(x), Some(y), Side::Upper) => Some(x.max(y)),
                (Some(x), Some(y), Side::Lower) => Some(x.min(y)),
                (x, y, _) => x.or(y),
            };
            // Keep the most informative failure; out-of-service yields to anything.
            let b_failed = !matches!(b.status, BoundStatus::Optimal | BoundStatus::OutOfService);
            if acc.status == BoundStatus::OutOfService || b_failed {
                acc.status = b.status;
            }
        }
    }
    if results.len() > 1 {
        let mut h = Sha256::new();
        for r in results {
            h.update(r.config_digest.as_bytes());
        }
        out.config_digest = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        out.method = format!("intersection of {} results", results.len());
    }
    Ok(out)
}
