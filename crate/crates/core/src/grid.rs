//! Network and fleet data, PTDF construction and DC line flows.
//!
//! Grid files are JSON:
//!
//! ```json
//! {
//!   "name": "two_node",
//!   "buses": ["n1", "n2"],
//!   "slack": "n2",
//!   "lines": [{"id": "l1", "from": "n1", "to": "n2", "susceptance": 1.0, "capacity": 100.0}],
//!   "generators": [{"id": "g1", "bus": "n1", "cost": 50.0, "pmin": 0.0, "pmax": 100.0}]
//! }
//! ```
//!
//! Line orientation (`from` -> `to`) fixes the sign of its flow: a positive
//! flow leaves `from`.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("unknown bus `{0}`")]
    UnknownBus(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("invalid line `{id}`: {reason}")]
    InvalidLine { id: String, reason: String },
    #[error("invalid generator `{id}`: {reason}")]
    InvalidGenerator { id: String, reason: String },
    #[error("unknown line `{0}`")]
    UnknownLine(String),
    #[error("grid has no buses")]
    Empty,
    #[error("bus graph is not connected ({islands} islands)")]
    DisconnectedGraph { islands: usize },
    #[error("reduced susceptance matrix is singular")]
    SingularSusceptanceMatrix,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from: String,
    pub to: String,
    /// Per unit on the common base.
    pub susceptance: f64,
    /// MW.
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    /// Marginal cost per MWh.
    pub cost: f64,
    pub pmin: f64,
    pub pmax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GridData {
    #[serde(default)]
    name: String,
    buses: Vec<String>,
    slack: String,
    lines: Vec<Line>,
    generators: Vec<Generator>,
}

/// Validated network. Bus, line and generator order is the file order and is
/// the index order used by every vector in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridData", into = "GridData")]
pub struct Grid {
    pub name: String,
    buses: Vec<String>,
    slack: usize,
    lines: Vec<Line>,
    generators: Vec<Generator>,
    line_ends: Vec<(usize, usize)>,
    gen_bus: Vec<usize>,
}

impl TryFrom<GridData> for Grid {
    type Error = GridError;

    fn try_from(d: GridData) -> Result<Self, GridError> {
        Grid::new(d.name, d.buses, &d.slack, d.lines, d.generators)
    }
}

impl From<Grid> for GridData {
    fn from(g: Grid) -> Self {
        GridData {
            name: g.name,
            slack: g.buses[g.slack].clone(),
            buses: g.buses,
            lines: g.lines,
            generators: g.generators,
        }
    }
}

impl Grid {
    pub fn new(
        name: impl Into<String>,
        buses: Vec<String>,
        slack: &str,
        lines: Vec<Line>,
        generators: Vec<Generator>,
    ) -> Result<Self, GridError> {
        if buses.is_empty() {
            return Err(GridError::Empty);
        }
        let mut index = HashMap::new();
        for (i, b) in buses.iter().enumerate() {
            if index.insert(b.as_str(), i).is_some() {
                return Err(GridError::DuplicateId(b.clone()));
            }
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| GridError::UnknownBus(id.to_string()))
        };
        let slack = lookup(slack)?;

        let mut seen = HashSet::new();
        let mut line_ends = Vec::with_capacity(lines.len());
        for l in &lines {
            if !seen.insert(l.id.clone()) {
                return Err(GridError::DuplicateId(l.id.clone()));
            }
            let (f, t) = (lookup(&l.from)?, lookup(&l.to)?);
            let bad = |reason: &str| GridError::InvalidLine {
                id: l.id.clone(),
                reason: reason.to_string(),
            };
            if f == t {
                return Err(bad("from and to are the same bus"));
            }
            if !(l.susceptance > 0.0 && l.susceptance.is_finite()) {
                return Err(bad("susceptance must be positive"));
            }
            if !(l.capacity > 0.0) {
                return Err(bad("capacity must be positive"));
            }
            line_ends.push((f, t));
        }
        let mut gen_bus = Vec::with_capacity(generators.len());
        for g in &generators {
            if !seen.insert(g.id.clone()) {
                return Err(GridError::DuplicateId(g.id.clone()));
            }
            let bad = |reason: &str| GridError::InvalidGenerator {
                id: g.id.clone(),
                reason: reason.to_string(),
            };
            if !(g.pmin >= 0.0 && g.pmax >= g.pmin && g.pmax.is_finite()) {
                return Err(bad("need 0 <= pmin <= pmax"));
            }
            if !(g.cost >= 0.0 && g.cost.is_finite()) {
                return Err(bad("cost must be non-negative"));
            }
            gen_bus.push(lookup(&g.bus)?);
        }
        Ok(Self {
            name: name.into(),
            buses,
            slack,
            lines,
            generators,
            line_ends,
            gen_bus,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self, GridError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GridError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grid serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GridError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn buses(&self) -> &[String] {
        &self.buses
    }
    pub fn lines(&self) -> &[Line] {
        &self.lines
    }
    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }
    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }
    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }
    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }
    pub fn slack(&self) -> usize {
        self.slack
    }
    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b == id)
    }
    pub fn line_index(&self, id: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }
    /// (from, to) bus indices.
    pub fn line_ends(&self, l: usize) -> (usize, usize) {
        self.line_ends[l]
    }
    pub fn generator_bus(&self, g: usize) -> usize {
        self.gen_bus[g]
    }

    /// Same network with a different reference bus.
    pub fn with_slack(&self, slack: usize) -> Self {
        let mut g = self.clone();
        g.slack = slack;
        g
    }

    /// Copy with every line capacity replaced by `f(line)`.
    pub fn map_capacities(&self, f: impl Fn(&Line) -> f64) -> Result<Self, GridError> {
        let lines = self
            .lines
            .iter()
            .map(|l| Line {
                capacity: f(l),
                ..l.clone()
            })
            .collect();
        Grid::new(
            self.name.clone(),
            self.buses.clone(),
            &self.buses[self.slack],
            lines,
            self.generators.clone(),
        )
    }

    /// Copy with line `id` taken out of service.
    pub fn without_line(&self, id: &str) -> Result<Self, GridError> {
        let l = self
            .line_index(id)
            .ok_or_else(|| GridError::UnknownLine(id.to_string()))?;
        let mut lines = self.lines.clone();
        lines.remove(l);
        Grid::new(
            format!("{}-{}", self.name, id),
            self.buses.clone(),
            &self.buses[self.slack],
            lines,
            self.generators.clone(),
        )
    }

    /// Number of connected components of the bus graph.
    pub fn islands(&self) -> usize {
        let n = self.buses.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut count = n;
        for &(f, t) in &self.line_ends {
            let (a, b) = (find(&mut parent, f), find(&mut parent, t));
            if a != b {
                parent[a] = b;
                count -= 1;
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.islands() == 1
    }

    /// Nodal injection q_n = sum of dispatch at n minus d_n.
    pub fn injections(&self, dispatch: &[f64], demand: &[f64]) -> Vec<f64> {
        let mut q: Vec<f64> = demand.iter().map(|d| -d).collect();
        for (g, p) in dispatch.iter().enumerate() {
            q[self.gen_bus[g]] += p;
        }
        q
    }
}

/// Dense |L| x |N| matrix of power transfer distribution factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtdfMatrix {
    n_lines: usize,
    n_buses: usize,
    slack: usize,
    values: Vec<f64>,
}

impl PtdfMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, slack: usize) -> Result<Self, GridError> {
        let n_lines = rows.len();
        let n_buses = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n_lines * n_buses);
        for r in rows {
            if r.len() != n_buses {
                return Err(GridError::DimensionMismatch {
                    expected: n_buses,
                    got: r.len(),
                });
            }
            values.extend(r);
        }
        Ok(Self {
            n_lines,
            n_buses,
            slack,
            values,
        })
    }

    pub fn num_lines(&self) -> usize {
        self.n_lines
    }
    pub fn num_buses(&self) -> usize {
        self.n_buses
    }
    pub fn slack(&self) -> usize {
        self.slack
    }
    pub fn get(&self, line: usize, bus: usize) -> f64 {
        self.values[line * self.n_buses + bus]
    }
    pub fn row(&self, line: usize) -> &[f64] {
        &self.values[line * self.n_buses..(line + 1) * self.n_buses]
    }

    pub fn line_flows(&self, q: &[f64]) -> Result<Vec<f64>, GridError> {
        line_flows(self, q)
    }
}

/// PTDF against the grid's slack bus: a_ln = b_l (X_fn - X_tn) with X the
/// inverse of the reduced bus susceptance matrix (slack row and column zero).
pub fn build_ptdf(grid: &Grid) -> Result<PtdfMatrix, GridError> {
    let n = grid.num_buses();
    let islands = grid.islands();
    if islands != 1 {
        return Err(GridError::DisconnectedGraph { islands });
    }
    let slack = grid.slack;
    let reduced = |i: usize| {
        if i < slack {
            Some(i)
        } else if i == slack {
            None
        } else {
            Some(i - 1)
        }
    };

    let mut b = DMatrix::<f64>::zeros(n - 1, n - 1);
    for (l, line) in grid.lines.iter().enumerate() {
        let (f, t) = grid.line_ends[l];
        let s = line.susceptance;
        if let Some(i) = reduced(f) {
            b[(i, i)] += s;
        }
        if let Some(j) = reduced(t) {
            b[(j, j)] += s;
        }
        if let (Some(i), Some(j)) = (reduced(f), reduced(t)) {
            b[(i, j)] -= s;
            b[(j, i)] -= s;
        }
    }
    let x = if n > 1 {
        b.lu().try_inverse().ok_or(GridError::SingularSusceptanceMatrix)?
    } else {
        DMatrix::zeros(0, 0)
    };
    let x_full = |i: usize, k: usize| match (reduced(i), reduced(k)) {
        (Some(a), Some(c)) => x[(a, c)],
        _ => 0.0,
    };

    let mut values = vec![0.0; grid.num_lines() * n];
    for (l, line) in grid.lines.iter().enumerate() {
        let (f, t) = grid.line_ends[l];
        for k in 0..n {
            values[l * n + k] = line.susceptance * (x_full(f, k) - x_full(t, k));
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(GridError::SingularSusceptanceMatrix);
    }
    Ok(PtdfMatrix {
        n_lines: grid.num_lines(),
        n_buses: n,
        slack,
        values,
    })
}

/// f_l = sum_n a_ln q_n.
pub fn line_flows(ptdf: &PtdfMatrix, q: &[f64]) -> Result<Vec<f64>, GridError> {
    if q.len() != ptdf.n_buses {
        return Err(GridError::DimensionMismatch {
            expected: ptdf.n_buses,
            got: q.len(),
        });
    }
    Ok((0..ptdf.n_lines)
        .map(|l| ptdf.row(l).iter().zip(q).map(|(a, v)| a * v).sum())
        .collect())
}
