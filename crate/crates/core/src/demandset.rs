//! Net-demand histories and the uncertainty sets built from them.
//!
//! History CSV: a header `period,<bus id>,<bus id>,...` followed by one row
//! per period. Allocation factors CSV: header `bus,xi`, one row per bus.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::{self, LinearProgram, Relation, Sense, SolverError, SolverOptions, Status, VarId};

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("demand history is empty")]
    EmptyHistory,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("kappa must be >= 1, got {0}")]
    InvalidKappa(f64),
    #[error("malformed csv: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Net demand per period (rows) and bus (columns), MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandHistory {
    buses: Vec<String>,
    labels: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl DemandHistory {
    pub fn new(buses: Vec<String>, labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, DemandError> {
        if labels.len() != rows.len() {
            return Err(DemandError::DimensionMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        for r in &rows {
            if r.len() != buses.len() {
                return Err(DemandError::DimensionMismatch {
                    expected: buses.len(),
                    got: r.len(),
                });
            }
        }
        Ok(Self { buses, labels, rows })
    }

    pub fn buses(&self) -> &[String] {
        &self.buses
    }
    pub fn labels(&self) -> &[String] {
        &self.labels
    }
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
    pub fn row(&self, t: usize) -> &[f64] {
        &self.rows[t]
    }
    pub fn len(&self) -> usize {
        self.rows.len()
    }
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Aggregate net demand of period `t`.
    pub fn aggregate(&self, t: usize) -> f64 {
        self.rows[t].iter().sum()
    }

    pub fn subset(&self, periods: &[usize]) -> Self {
        Self {
            buses: self.buses.clone(),
            labels: periods.iter().map(|&t| self.labels[t].clone()).collect(),
            rows: periods.iter().map(|&t| self.rows[t].clone()).collect(),
        }
    }

    /// Reorder columns to match `buses`; buses missing from the file get zero demand.
    pub fn aligned_to(&self, buses: &[String]) -> Result<Self, DemandError> {
        let mut map = Vec::with_capacity(buses.len());
        for b in buses {
            map.push(self.buses.iter().position(|x| x == b));
        }
        for b in &self.buses {
            if !buses.contains(b) {
                return Err(DemandError::Format(format!("history column `{b}` is not a grid bus")));
            }
        }
        let rows = self
            .rows
            .iter()
            .map(|r| map.iter().map(|m| m.map_or(0.0, |i| r[i])).collect())
            .collect();
        Ok(Self {
            buses: buses.to_vec(),
            labels: self.labels.clone(),
            rows,
        })
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, DemandError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let has_label = headers.get(0) == Some("period");
        let skip = usize::from(has_label);
        let buses: Vec<String> = headers.iter().skip(skip).map(str::to_string).collect();
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            labels.push(if has_label {
                rec.get(0).unwrap_or_default().to_string()
            } else {
                format!("t{}", i + 1)
            });
            let row = rec
                .iter()
                .skip(skip)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| DemandError::Format(format!("row {}: `{v}` is not a number", i + 1)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::new(buses, labels, rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DemandError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["period".to_string()];
        header.extend(self.buses.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(&self.rows) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DemandError> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DemandError> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// The set of net-demand vectors a screening verdict must hold for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemandSet {
    Singleton {
        demand: Vec<f64>,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// d = sum_t alpha_t row_t with alpha >= 0 and 1 <= sum alpha <= kappa
    /// (equality when kappa = 1).
    ConvexHull {
        rows: Arc<Vec<Vec<f64>>>,
        kappa: f64,
    },
}

pub fn box_from_history(history: &DemandHistory) -> Result<DemandSet, DemandError> {
    let first = history.rows.first().ok_or(DemandError::EmptyHistory)?;
    let mut lower = first.clone();
    let mut upper = first.clone();
    for r in &history.rows[1..] {
        for (n, &v) in r.iter().enumerate() {
            lower[n] = lower[n].min(v);
            upper[n] = upper[n].max(v);
        }
    }
    Ok(DemandSet::Box { lower, upper })
}

pub fn hull_from_history(history: &DemandHistory, kappa: f64) -> Result<DemandSet, DemandError> {
    if history.is_empty() {
        return Err(DemandError::EmptyHistory);
    }
    if !(kappa >= 1.0) {
        return Err(DemandError::InvalidKappa(kappa));
    }
    Ok(DemandSet::ConvexHull {
        rows: Arc::new(history.rows.clone()),
        kappa,
    })
}

const MEMBERSHIP_TOL: f64 = 1e-9;

impl DemandSet {
    pub fn dimension(&self) -> usize {
        match self {
            DemandSet::Singleton { demand } => demand.len(),
            DemandSet::Box { lower, .. } => lower.len(),
            DemandSet::ConvexHull { rows, .. } => rows.first().map_or(0, Vec::len),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            DemandSet::Singleton { .. } => "singleton",
            DemandSet::Box { .. } => "box",
            DemandSet::ConvexHull { .. } => "convex_hull",
        }
    }

    /// Adds one variable per bus holding d_n, plus whatever the set needs to
    /// pin it down. Returns the demand variables in bus order.
    pub fn attach(&self, lp: &mut LinearProgram) -> Vec<VarId> {
        match self {
            DemandSet::Singleton { demand } => demand
                .iter()
                .enumerate()
                .map(|(n, &v)| lp.add_var(format!("d[{n}]"), v, v, 0.0))
                .collect(),
            DemandSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .enumerate()
                .map(|(n, (&lo, &hi))| lp.add_var(format!("d[{n}]"), lo, hi, 0.0))
                .collect(),
            DemandSet::ConvexHull { rows, kappa } => {
                let dim = self.dimension();
                let d: Vec<VarId> = (0..dim)
                    .map(|n| lp.add_var(format!("d[{n}]"), f64::NEG_INFINITY, f64::INFINITY, 0.0))
                    .collect();
                let alpha: Vec<VarId> = (0..rows.len())
                    .map(|t| lp.add_var(format!("alpha[{t}]"), 0.0, f64::INFINITY, 0.0))
                    .collect();
                for n in 0..dim {
                    let mut coeffs = vec![(d[n], 1.0)];
                    coeffs.extend(
                        rows.iter()
                            .zip(&alpha)
                            .filter(|(r, _)| r[n] != 0.0)
                            .map(|(r, &a)| (a, -r[n])),
                    );
                    lp.add_constraint(format!("hull[{n}]"), coeffs, Relation::Eq, 0.0);
                }
                let sum: Vec<(VarId, f64)> = alpha.iter().map(|&a| (a, 1.0)).collect();
                if *kappa == 1.0 {
                    lp.add_constraint("hull_weights", sum, Relation::Eq, 1.0);
                } else {
                    lp.add_constraint("hull_weights_lo", sum.clone(), Relation::Ge, 1.0);
                    lp.add_constraint("hull_weights_hi", sum, Relation::Le, *kappa);
                }
                d
            }
        }
    }

    /// Range of the aggregate demand sum_n d_n over the set.
    pub fn aggregate_range(&self) -> (f64, f64) {
        match self {
            DemandSet::Singleton { demand } => {
                let s = demand.iter().sum();
                (s, s)
            }
            DemandSet::Box { lower, upper } => (lower.iter().sum(), upper.iter().sum()),
            DemandSet::ConvexHull { rows, kappa } => {
                let sums: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
                let lo = sums.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                // Scaling the weights up to kappa stretches whichever side moves away from zero.
                (lo.min(kappa * lo), hi.max(kappa * hi))
            }
        }
    }

    pub fn contains(&self, d: &[f64]) -> Result<bool, DemandError> {
        membership(self, d)
    }

    /// A random member of the set.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            DemandSet::Singleton { demand } => demand.clone(),
            DemandSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&lo, &hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                .collect(),
            DemandSet::ConvexHull { rows, kappa } => {
                // Sparse random weights: a handful of rows, exponential draws normalised.
                let k = rows.len().min(4);
                let mut weights = vec![0.0; rows.len()];
                for _ in 0..k {
                    let t = rng.gen_range(0..rows.len());
                    weights[t] += -rng.gen::<f64>().max(1e-12).ln();
                }
                let total: f64 = weights.iter().sum();
                let scale = if *kappa > 1.0 { rng.gen_range(1.0..=*kappa) } else { 1.0 };
                let mut d = vec![0.0; self.dimension()];
                for (w, r) in weights.iter().zip(rows.iter()) {
                    if *w > 0.0 {
                        for (dn, v) in d.iter_mut().zip(r) {
                            *dn += scale * w / total * v;
                        }
                    }
                }
                d
            }
        }
    }
}

pub fn membership(set: &DemandSet, d: &[f64]) -> Result<bool, DemandError> {
    if d.len() != set.dimension() {
        return Err(DemandError::DimensionMismatch {
            expected: set.dimension(),
            got: d.len(),
        });
    }
    match set {
        DemandSet::Singleton { demand } => Ok(demand.iter().zip(d).all(|(a, b)| (a - b).abs() <= MEMBERSHIP_TOL)),
        DemandSet::Box { lower, upper } => Ok(d
            .iter()
            .zip(lower.iter().zip(upper))
            .all(|(v, (lo, hi))| *v >= lo - MEMBERSHIP_TOL && *v <= hi + MEMBERSHIP_TOL)),
        DemandSet::ConvexHull { .. } => {
            let mut lp = LinearProgram::new(Sense::Minimize);
            let vars = set.attach(&mut lp);
            for (v, &value) in vars.iter().zip(d) {
                lp.set_bounds(*v, value, value);
            }
            let out = solver::solve_lp(&lp, &SolverOptions::default())?;
            Ok(out.status == Status::Optimal)
        }
    }
}

/// Nodal allocation factors of the system net load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationFactors {
    pub buses: Vec<String>,
    pub xi: Vec<f64>,
}

impl AllocationFactors {
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, DemandError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut buses = Vec::new();
        let mut xi = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let bus = rec
                .get(0)
                .ok_or_else(|| DemandError::Format("missing bus column".into()))?;
            let v = rec
                .get(1)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| DemandError::Format(format!("bad factor for bus `{bus}`")))?;
            buses.push(bus.to_string());
            xi.push(v);
        }
        Ok(Self { buses, xi })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DemandError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bus", "xi"])?;
        for (b, x) in self.buses.iter().zip(&self.xi) {
            w.write_record([b.clone(), x.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DemandError> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DemandError> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reorder to `buses`; buses without a factor get zero.
    pub fn aligned_to(&self, buses: &[String]) -> Result<Self, DemandError> {
        if let Some(b) = self.buses.iter().find(|b| !buses.contains(b)) {
            return Err(DemandError::Format(format!("factor for `{b}` is not a grid bus")));
        }
        let xi = buses
            .iter()
            .map(|b| self.buses.iter().position(|x| x == b).map_or(0.0, |i| self.xi[i]))
            .collect();
        Ok(Self {
            buses: buses.to_vec(),
            xi,
        })
    }
}

/// Draw `n_periods` demand vectors: L ~ U(l_range), then independently per
/// bus d_n ~ U((1 - width) L xi_n, (1 + width) L xi_n). Factors are
/// normalised to sum to one.
pub fn generate_history(
    factors: &AllocationFactors,
    n_periods: usize,
    l_range: (f64, f64),
    width: f64,
    seed: u64,
) -> Result<DemandHistory, DemandError> {
    let (lo, hi) = l_range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(DemandError::InvalidRange(format!("load range [{lo}, {hi}]")));
    }
    if !(0.0..=1.0).contains(&width) {
        return Err(DemandError::InvalidRange(format!("width {width}")));
    }
    if factors.xi.iter().any(|x| !(*x >= 0.0)) {
        return Err(DemandError::InvalidRange(
            "allocation factors must be non-negative".into(),
        ));
    }
    let total: f64 = factors.xi.iter().sum();
    if !(total > 0.0) {
        return Err(DemandError::InvalidRange("allocation factors sum to zero".into()));
    }
    let xi: Vec<f64> = factors.xi.iter().map(|x| x / total).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n_periods);
    for _ in 0..n_periods {
        let l = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let row = xi
            .iter()
            .map(|&x| {
                let (a, b) = ((1.0 - width) * l * x, (1.0 + width) * l * x);
                if b > a {
                    rng.gen_range(a..=b)
                } else {
                    l * x
                }
            })
            .collect();
        rows.push(row);
    }
    let labels = (1..=n_periods).map(|t| format!("t{t}")).collect();
    DemandHistory::new(factors.buses.clone(), labels, rows)
}
