//! Demand-dependent cost budget: an upper-envelope piecewise-linear fit of
//! observed optimal cost against aggregate net demand.
//!
//! Each segment is fitted independently by the boundary (tau = 1) quantile
//! regression: minimise the total slack sum_i (rho + nu D_i - C_i) subject to
//! rho + nu D_i >= C_i for every point in the segment. No continuity is
//! imposed across breakpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::{self, LinearProgram, Relation, Sense, SolverError, SolverOptions, Status};

/// Candidate cut positions examined by the breakpoint search.
const MAX_CANDIDATES: usize = 100;
const RANGE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CostBoundError {
    #[error("too few points: need {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("segment {segment} has no spread in aggregate demand")]
    DegenerateSegment { segment: usize },
    #[error("aggregate demand {demand} outside fitted range [{lower}, {upper}]")]
    OutOfFittedRange { demand: f64, lower: f64, upper: f64 },
    #[error("invalid breakpoints: {0}")]
    InvalidBreakpoints(String),
    #[error("quantile fit LP ended with status {0:?}")]
    FitFailed(Status),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    /// Aggregate net demand, MW.
    pub demand: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lower: f64,
    pub upper: f64,
    pub intercept: f64,
    pub slope: f64,
}

impl Segment {
    pub fn value(&self, demand: f64) -> f64 {
        self.intercept + self.slope * demand
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBoundModel {
    pub segments: Vec<Segment>,
}

impl CostBoundModel {
    /// Flat budget over `[lower, upper]`.
    pub fn constant(budget: f64, lower: f64, upper: f64) -> Self {
        Self {
            segments: vec![Segment {
                lower,
                upper,
                intercept: budget,
                slope: 0.0,
            }],
        }
    }

    pub fn lower(&self) -> f64 {
        self.segments.first().map_or(f64::NAN, |s| s.lower)
    }

    pub fn upper(&self) -> f64 {
        self.segments.last().map_or(f64::NAN, |s| s.upper)
    }

    /// Stretch the outer segments so the model covers `[lower, upper]`; the
    /// end pieces are extrapolated.
    pub fn widened(&self, lower: f64, upper: f64) -> Self {
        let mut out = self.clone();
        if let Some(first) = out.segments.first_mut() {
            first.lower = first.lower.min(lower);
        }
        if let Some(last) = out.segments.last_mut() {
            last.upper = last.upper.max(upper);
        }
        out
    }

    pub fn evaluate(&self, demand: f64) -> Result<f64, CostBoundError> {
        evaluate_bound(self, demand)
    }

    /// Total slack sum_i (bound(D_i) - C_i).
    pub fn total_slack(&self, points: &[CostPoint]) -> Result<f64, CostBoundError> {
        points.iter().map(|p| Ok(self.evaluate(p.demand)? - p.cost)).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CostBoundError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CostBoundError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub fn evaluate_bound(model: &CostBoundModel, demand: f64) -> Result<f64, CostBoundError> {
    let (lo, hi) = (model.lower(), model.upper());
    let tol = RANGE_TOL * (1.0 + demand.abs());
    if !(demand >= lo - tol && demand <= hi + tol) {
        return Err(CostBoundError::OutOfFittedRange {
            demand,
            lower: lo,
            upper: hi,
        });
    }
    // Ties at a shared breakpoint go to the left segment.
    let seg = model
        .segments
        .iter()
        .find(|s| demand <= s.upper + tol)
        .unwrap_or_else(|| model.segments.last().expect("non-empty model"));
    Ok(seg.value(demand))
}

fn sorted(points: &[CostPoint]) -> Vec<CostPoint> {
    let mut v = points.to_vec();
    v.sort_by(|a, b| a.demand.total_cmp(&b.demand).then(a.cost.total_cmp(&b.cost)));
    v
}

/// Cut positions into the sorted points together with the breakpoint value
/// each represents. Position k separates points [..k) from [k..).
fn candidate_cuts(pts: &[CostPoint]) -> Vec<(usize, f64)> {
    let n = pts.len();
    let gaps: Vec<usize> = (1..n).filter(|&k| pts[k].demand > pts[k - 1].demand).collect();
    if gaps.len() <= MAX_CANDIDATES {
        return gaps
            .into_iter()
            .map(|k| (k, 0.5 * (pts[k - 1].demand + pts[k].demand)))
            .collect();
    }
    let (lo, hi) = (pts[0].demand, pts[n - 1].demand);
    let mut cuts: Vec<(usize, f64)> = Vec::with_capacity(MAX_CANDIDATES);
    for i in 1..=MAX_CANDIDATES {
        let g = lo + (hi - lo) * i as f64 / (MAX_CANDIDATES + 1) as f64;
        let k = pts.partition_point(|p| p.demand <= g);
        if k > 0 && k < n && cuts.last().map_or(true, |c| c.0 != k) {
            cuts.push((k, g));
        }
    }
    cuts
}

/// Prefix sums for O(1) least-squares cost of any contiguous run.
struct Prefix {
    s1: Vec<f64>,
    sx: Vec<f64>,
    sy: Vec<f64>,
    sxx: Vec<f64>,
    sxy: Vec<f64>,
    syy: Vec<f64>,
}

impl Prefix {
    fn new(pts: &[CostPoint]) -> Self {
        let mut p = Prefix {
            s1: vec![0.0],
            sx: vec![0.0],
            sy: vec![0.0],
            sxx: vec![0.0],
            sxy: vec![0.0],
            syy: vec![0.0],
        };
        for q in pts {
            let (x, y) = (q.demand, q.cost);
            p.s1.push(p.s1.last().unwrap() + 1.0);
            p.sx.push(p.sx.last().unwrap() + x);
            p.sy.push(p.sy.last().unwrap() + y);
            p.sxx.push(p.sxx.last().unwrap() + x * x);
            p.sxy.push(p.sxy.last().unwrap() + x * y);
            p.syy.push(p.syy.last().unwrap() + y * y);
        }
        p
    }

    /// Residual sum of squares of the OLS line over points [i, j).
    fn sse(&self, i: usize, j: usize) -> f64 {
        let n = self.s1[j] - self.s1[i];
        let sx = self.sx[j] - self.sx[i];
        let sy = self.sy[j] - self.sy[i];
        let sxx = self.sxx[j] - self.sxx[i] - sx * sx / n;
        let sxy = self.sxy[j] - self.sxy[i] - sx * sy / n;
        let syy = self.syy[j] - self.syy[i] - sy * sy / n;
        if sxx <= 0.0 {
            return syy.max(0.0);
        }
        (syy - sxy * sxy / sxx).max(0.0)
    }
}

/// Dynamic program over cut positions. `cost(i, j)` is the cost of one
/// segment over sorted points [i, j), or `None` if that run is not a valid segment.
fn best_partition(
    pts: &[CostPoint],
    n_segments: usize,
    cost: impl Fn(usize, usize) -> Option<f64>,
) -> Option<Vec<f64>> {
    let n = pts.len();
    let cuts = candidate_cuts(pts);
    // Node 0 is the start, nodes 1..=K are cuts, node K+1 is the end.
    let mut pos = vec![0usize];
    let mut val = vec![pts[0].demand];
    for (k, v) in &cuts {
        pos.push(*k);
        val.push(*v);
    }
    pos.push(n);
    val.push(pts[n - 1].demand);
    let nodes = pos.len();

    let mut seg_cost = vec![vec![None; nodes]; nodes];
    for a in 0..nodes {
        for b in a + 1..nodes {
            seg_cost[a][b] = cost(pos[a], pos[b]);
        }
    }

    let inf = f64::INFINITY;
    let mut dp = vec![vec![inf; nodes]; n_segments + 1];
    let mut from = vec![vec![usize::MAX; nodes]; n_segments + 1];
    dp[0][0] = 0.0;
    for s in 1..=n_segments {
        for b in 1..nodes {
            for a in 0..b {
                if dp[s - 1][a] == inf {
                    continue;
                }
                if let Some(c) = seg_cost[a][b] {
                    let v = dp[s - 1][a] + c;
                    if v < dp[s][b] {
                        dp[s][b] = v;
                        from[s][b] = a;
                    }
                }
            }
        }
    }
    if dp[n_segments][nodes - 1] == inf {
        return None;
    }
    let mut path = vec![nodes - 1];
    let mut node = nodes - 1;
    for s in (1..=n_segments).rev() {
        node = from[s][node];
        path.push(node);
    }
    path.reverse();
    Some(path.into_iter().map(|k| val[k]).collect())
}

fn valid_run(pts: &[CostPoint], i: usize, j: usize) -> bool {
    j >= i + 2 && pts[j - 1].demand > pts[i].demand
}

/// Breakpoints `[D_min, interior..., D_max]` of the least-squares segmented
/// fit with `n_segments` pieces, searched over a grid of candidate cuts.
pub fn find_breakpoints(points: &[CostPoint], n_segments: usize) -> Result<Vec<f64>, CostBoundError> {
    if n_segments == 0 {
        return Err(CostBoundError::InvalidBreakpoints("need at least one segment".into()));
    }
    let needed = 2 * n_segments;
    if points.len() < needed {
        return Err(CostBoundError::TooFewPoints {
            needed,
            got: points.len(),
        });
    }
    let pts = sorted(points);
    if n_segments == 1 {
        return Ok(vec![pts[0].demand, pts[pts.len() - 1].demand]);
    }
    let prefix = Prefix::new(&pts);
    best_partition(&pts, n_segments, |i, j| valid_run(&pts, i, j).then(|| prefix.sse(i, j))).ok_or(
        CostBoundError::TooFewPoints {
            needed,
            got: points.len(),
        },
    )
}

/// Upper-envelope line for one segment, from the dual of the slack LP:
/// max sum_i C_i w_i s.t. sum_i w_i = n, sum_i D_i w_i = sum_i D_i, w >= 0.
/// The row duals of the two equalities are the intercept and slope.
fn fit_segment(points: &[CostPoint], segment: usize) -> Result<(f64, f64), CostBoundError> {
    if points.len() < 2 {
        return Err(CostBoundError::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    let d_min = points.iter().map(|p| p.demand).fold(f64::INFINITY, f64::min);
    let d_max = points.iter().map(|p| p.demand).fold(f64::NEG_INFINITY, f64::max);
    if !(d_max > d_min) {
        return Err(CostBoundError::DegenerateSegment { segment });
    }
    // Centre demand for conditioning; the intercept is shifted back below.
    let centre = 0.5 * (d_min + d_max);
    let mut lp = LinearProgram::new(Sense::Maximize);
    let w: Vec<_> = points
        .iter()
        .enumerate()
        .map(|(i, p)| lp.add_var(format!("w[{i}]"), 0.0, f64::INFINITY, p.cost))
        .collect();
    let n = points.len() as f64;
    let sum_d: f64 = points.iter().map(|p| p.demand - centre).sum();
    lp.add_constraint("count", w.iter().map(|&v| (v, 1.0)).collect(), Relation::Eq, n);
    lp.add_constraint(
        "moment",
        w.iter().zip(points).map(|(&v, p)| (v, p.demand - centre)).collect(),
        Relation::Eq,
        sum_d,
    );
    let out = solver::solve_lp(&lp, &SolverOptions::default())?;
    if out.status != Status::Optimal {
        return Err(CostBoundError::FitFailed(out.status));
    }
    let duals = out.duals.expect("LP duals");
    let slope = duals[1];
    let mut intercept = duals[0] - slope * centre;
    // Lift away round-off so every point sits on or below the line.
    let worst = points
        .iter()
        .map(|p| p.cost - (intercept + slope * p.demand))
        .fold(0.0_f64, f64::max);
    intercept += worst;
    Ok((intercept, slope))
}

pub fn fit_quantile_pwl(points: &[CostPoint], breakpoints: &[f64]) -> Result<CostBoundModel, CostBoundError> {
    if breakpoints.len() < 2 {
        return Err(CostBoundError::InvalidBreakpoints(
            "need at least two breakpoints".into(),
        ));
    }
    if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CostBoundError::InvalidBreakpoints("breakpoints must increase".into()));
    }
    let n_seg = breakpoints.len() - 1;
    let (lo, hi) = (breakpoints[0], breakpoints[n_seg]);
    let mut buckets: Vec<Vec<CostPoint>> = vec![Vec::new(); n_seg];
    for p in points {
        let tol = RANGE_TOL * (1.0 + p.demand.abs());
        if p.demand < lo - tol || p.demand > hi + tol {
            return Err(CostBoundError::OutOfFittedRange {
                demand: p.demand,
                lower: lo,
                upper: hi,
            });
        }
        let s = (0..n_seg)
            .find(|&s| p.demand <= breakpoints[s + 1] + tol)
            .unwrap_or(n_seg - 1);
        buckets[s].push(*p);
    }
    let mut segments = Vec::with_capacity(n_seg);
    for (s, bucket) in buckets.iter().enumerate() {
        let (intercept, slope) = fit_segment(bucket, s)?;
        segments.push(Segment {
            lower: breakpoints[s],
            upper: breakpoints[s + 1],
            intercept,
            slope,
        });
    }
    Ok(CostBoundModel { segments })
}

/// Least-squares breakpoints followed by the upper-envelope fit.
pub fn fit_cost_bound(points: &[CostPoint], n_segments: usize) -> Result<CostBoundModel, CostBoundError> {
    let bps = find_breakpoints(points, n_segments)?;
    fit_quantile_pwl(points, &bps)
}

/// Total slack of the tightest upper-envelope line over sorted points [i, j):
/// the upper-hull edge above the mean demand.
fn envelope_slack(pts: &[CostPoint]) -> f64 {
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        let q = (p.demand, p.cost);
        if let Some(last) = hull.last_mut() {
            if last.0 == q.0 {
                last.1 = last.1.max(q.1);
                continue;
            }
        }
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (q.1 - a.1) - (b.1 - a.1) * (q.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(q);
    }
    let n = pts.len() as f64;
    let mean = pts.iter().map(|p| p.demand).sum::<f64>() / n;
    let k = hull.partition_point(|h| h.0 <= mean).clamp(1, hull.len() - 1);
    let (a, b) = (hull[k - 1], hull[k]);
    let slope = (b.1 - a.1) / (b.0 - a.0);
    let at_mean = a.1 + slope * (mean - a.0);
    (n * at_mean - pts.iter().map(|p| p.cost).sum::<f64>()).max(0.0)
}

/// Smallest achievable total slack for each segment count 1..=max_segments.
/// Breakpoints are chosen on the same candidate grid as [`find_breakpoints`]
/// but to minimise the quantile loss itself, which makes the curve
/// nonincreasing.
pub fn quantile_loss_curve(points: &[CostPoint], max_segments: usize) -> Result<Vec<f64>, CostBoundError> {
    if max_segments == 0 {
        return Err(CostBoundError::InvalidBreakpoints("need at least one segment".into()));
    }
    if points.len() < 2 {
        return Err(CostBoundError::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    let pts = sorted(points);
    let mut curve = Vec::with_capacity(max_segments);
    for n in 1..=max_segments {
        let Some(bps) = best_partition(&pts, n, |i, j| {
            valid_run(&pts, i, j).then(|| envelope_slack(&pts[i..j]))
        }) else {
            break;
        };
        let model = fit_quantile_pwl(&pts, &bps)?;
        curve.push(model.total_slack(&pts)?);
    }
    if curve.is_empty() {
        return Err(CostBoundError::DegenerateSegment { segment: 0 });
    }
    Ok(curve)
}

/// Segment count at the elbow of a loss curve: the point farthest from the
/// chord joining the first and last entries (both axes scaled to [0, 1]).
pub fn elbow(curve: &[f64]) -> usize {
    let m = curve.len();
    if m <= 2 {
        return 1;
    }
    let (first, last) = (curve[0], curve[m - 1]);
    let span = first - last;
    if !(span > 1e-12 * first.abs().max(1.0)) {
        return 1;
    }
    let mut best = (1, 0.0);
    for (i, &v) in curve.iter().enumerate() {
        let x = i as f64 / (m - 1) as f64;
        let y = (v - last) / span;
        // Chord runs from (0, 1) to (1, 0); distance is proportional to 1 - x - y.
        let dist = 1.0 - x - y;
        if dist > best.1 + 1e-12 {
            best = (i + 1, dist);
        }
    }
    best.0
}
