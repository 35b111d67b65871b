//! Bounded-variable revised simplex with an explicit dense basis inverse.
//!
//! Every row gets a slack (`a x + s = b`) whose bounds encode the relation.
//! Rows whose initial slack would be out of bounds start with an artificial
//! variable; phase one drives the artificials to zero. Dantzig pricing is
//! used until a run of degenerate pivots, then Bland's rule takes over until
//! the objective moves again.

use super::{LinearProgram, Relation, SolveOutcome, SolverError, SolverOptions, Status};

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_RUN: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic free variable parked at zero.
    Free,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Simplex {
    m: usize,
    n_struct: usize,
    /// Sparse columns for structurals, then slacks, then artificials.
    cols: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    up: Vec<f64>,
    b: Vec<f64>,
    is_artificial: Vec<bool>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    /// Row-major m x m.
    binv: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    max_iterations: usize,
    tol_feas: f64,
    tol_opt: f64,
}

pub fn solve_lp(lp: &LinearProgram, opts: &SolverOptions) -> Result<SolveOutcome, SolverError> {
    lp.validate()?;
    if lp.has_integers() {
        return Err(SolverError::IntegerVariables);
    }
    solve_relaxation(lp, opts)
}

/// Solve the LP ignoring integrality marks.
pub(crate) fn solve_relaxation(lp: &LinearProgram, opts: &SolverOptions) -> Result<SolveOutcome, SolverError> {
    let sign = lp.sense.sign();
    let mut spx = Simplex::build(lp, opts);
    let n_total = spx.cols.len();

    // Phase one.
    let phase1_cost: Vec<f64> = (0..n_total)
        .map(|j| if spx.is_artificial[j] { 1.0 } else { 0.0 })
        .collect();
    if spx.is_artificial.iter().any(|&a| a) {
        spx.run(&phase1_cost)?;
        spx.compute_basic_values();
        let infeas: f64 = (0..n_total)
            .filter(|&j| spx.is_artificial[j])
            .map(|j| spx.x[j].abs())
            .sum();
        let b_inf = spx.b.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if infeas > opts.tol_feas * (1.0 + b_inf) {
            return Ok(SolveOutcome::infeasible(spx.iterations));
        }
        spx.drive_out_artificials()?;
    }
    for j in 0..n_total {
        if spx.is_artificial[j] {
            spx.lo[j] = 0.0;
            spx.up[j] = 0.0;
            if !matches!(spx.state[j], VarState::Basic(_)) {
                spx.state[j] = VarState::AtLower;
                spx.x[j] = 0.0;
            }
        }
    }

    // Phase two on the internal minimization.
    let mut cost = vec![0.0; n_total];
    for (j, c) in lp.objective.iter().enumerate() {
        cost[j] = sign * c;
    }
    match spx.run(&cost)? {
        PhaseEnd::Unbounded => return Ok(SolveOutcome::unbounded(lp.sense, spx.iterations)),
        PhaseEnd::Optimal => {}
    }
    spx.refactor()?;
    spx.compute_basic_values();

    let mut values: Vec<f64> = spx.x[..spx.n_struct].to_vec();
    for (j, v) in values.iter_mut().enumerate() {
        // Clean values that sit within tolerance of a bound.
        let var = &lp.variables[j];
        if (*v - var.lower).abs() <= opts.tol_feas {
            *v = var.lower;
        } else if (*v - var.upper).abs() <= opts.tol_feas {
            *v = var.upper;
        }
    }
    let y = spx.duals(&cost);
    let reduced: Vec<f64> = (0..spx.n_struct)
        .map(|j| sign * (cost[j] - spx.col_dot(j, &y)))
        .collect();
    let duals: Vec<f64> = y.iter().map(|v| sign * v).collect();
    let objective = lp.evaluate(&values);
    Ok(SolveOutcome {
        status: Status::Optimal,
        objective,
        values,
        duals: Some(duals),
        reduced_costs: Some(reduced),
        iterations: spx.iterations,
        nodes: 0,
    })
}

impl Simplex {
    fn build(lp: &LinearProgram, opts: &SolverOptions) -> Self {
        let m = lp.constraints.len();
        let n_struct = lp.variables.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_struct];
        for (i, c) in lp.constraints.iter().enumerate() {
            for &(j, a) in &c.coeffs {
                if a == 0.0 {
                    continue;
                }
                match cols[j].last_mut() {
                    Some((r, v)) if *r == i => *v += a,
                    _ => cols[j].push((i, a)),
                }
            }
        }
        let mut lo: Vec<f64> = lp.variables.iter().map(|v| v.lower).collect();
        let mut up: Vec<f64> = lp.variables.iter().map(|v| v.upper).collect();
        let mut state = Vec::with_capacity(n_struct + 2 * m);
        let mut x = Vec::with_capacity(n_struct + 2 * m);
        for j in 0..n_struct {
            let (s, v) = if lo[j].is_finite() {
                (VarState::AtLower, lo[j])
            } else if up[j].is_finite() {
                (VarState::AtUpper, up[j])
            } else {
                (VarState::Free, 0.0)
            };
            state.push(s);
            x.push(v);
        }
        let mut is_artificial = vec![false; n_struct];
        let b: Vec<f64> = lp.constraints.iter().map(|c| c.rhs).collect();

        // Residual of each row at the initial nonbasic point.
        let mut residual = b.clone();
        for (j, col) in cols.iter().enumerate().take(n_struct) {
            if x[j] != 0.0 {
                for &(i, a) in col {
                    residual[i] -= a * x[j];
                }
            }
        }

        let mut basis = vec![usize::MAX; m];
        let mut binv = vec![0.0; m * m];
        for (i, c) in lp.constraints.iter().enumerate() {
            let slack_range = match c.relation {
                Relation::Le => Some((0.0, f64::INFINITY)),
                Relation::Ge => Some((f64::NEG_INFINITY, 0.0)),
                Relation::Eq => None,
            };
            let r = residual[i];
            if let Some((slo, sup)) = slack_range {
                let j = cols.len();
                cols.push(vec![(i, 1.0)]);
                lo.push(slo);
                up.push(sup);
                is_artificial.push(false);
                if r >= slo && r <= sup {
                    state.push(VarState::Basic(i));
                    x.push(r);
                    basis[i] = j;
                    binv[i * m + i] = 1.0;
                    continue;
                }
                state.push(VarState::AtLower);
                x.push(0.0);
                if slo == f64::NEG_INFINITY {
                    state[j] = VarState::AtUpper;
                }
            }
            let sigma = if r >= 0.0 { 1.0 } else { -1.0 };
            let j = cols.len();
            cols.push(vec![(i, sigma)]);
            lo.push(0.0);
            up.push(f64::INFINITY);
            is_artificial.push(true);
            state.push(VarState::Basic(i));
            x.push(r.abs());
            basis[i] = j;
            binv[i * m + i] = sigma;
        }

        let n_total = cols.len();
        let max_iterations = opts.max_iterations.unwrap_or(50 * (m + n_total) + 10_000);
        Self {
            m,
            n_struct,
            cols,
            lo,
            up,
            b,
            is_artificial,
            basis,
            state,
            x,
            binv,
            since_refactor: 0,
            iterations: 0,
            max_iterations,
            tol_feas: opts.tol_feas,
            tol_opt: opts.tol_opt,
        }
    }

    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        self.cols[j].iter().map(|&(i, a)| a * y[i]).sum()
    }

    /// y = c_B^T B^{-1}
    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &j) in self.basis.iter().enumerate() {
            let c = cost[j];
            if c != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yi, bi) in y.iter_mut().zip(row) {
                    *yi += c * bi;
                }
            }
        }
        y
    }

    /// B^{-1} a_j
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for &(k, a) in &self.cols[j] {
            for (r, o) in out.iter_mut().enumerate() {
                *o += self.binv[r * m + k] * a;
            }
        }
        out
    }

    fn compute_basic_values(&mut self) {
        let m = self.m;
        let mut rhs = self.b.clone();
        for (j, s) in self.state.iter().enumerate() {
            if !matches!(s, VarState::Basic(_)) && self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    rhs[i] -= a * self.x[j];
                }
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
            self.x[self.basis[r]] = v;
        }
    }

    /// Rebuild B^{-1} from the basis columns by Gauss-Jordan elimination.
    fn refactor(&mut self) -> Result<(), SolverError> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        let mut a = vec![0.0; m * m];
        for (r, &j) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                a[i * m + r] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let (piv, pval) = (col..m)
                .map(|r| (r, a[r * m + col].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pval < 1e-12 {
                return Err(SolverError::NumericalBreakdown {
                    iterations: self.iterations,
                    reason: "singular basis".into(),
                });
            }
            if piv != col {
                for k in 0..m {
                    a.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let d = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[col * m + k];
                        inv[r * m + k] -= f * inv[col * m + k];
                    }
                }
            }
        }
        // Row r of B^{-1} corresponds to basis position r, which is column r of B.
        self.binv = inv;
        Ok(())
    }

    fn pivot_update(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let p = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= p;
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        for (i, row) in before.chunks_mut(m).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                for (x, pr) in row.iter_mut().zip(pivot_row.iter()) {
                    *x -= f * pr;
                }
            }
        }
        for (off, row) in after.chunks_mut(m).enumerate() {
            let f = alpha[r + 1 + off];
            if f != 0.0 {
                for (x, pr) in row.iter_mut().zip(pivot_row.iter()) {
                    *x -= f * pr;
                }
            }
        }
        self.since_refactor += 1;
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    fn run(&mut self, cost: &[f64]) -> Result<PhaseEnd, SolverError> {
        let n_total = self.cols.len();
        let mut bland = false;
        let mut degenerate = 0usize;
        self.compute_basic_values();
        loop {
            if self.iterations >= self.max_iterations {
                return Err(SolverError::NumericalBreakdown {
                    iterations: self.iterations,
                    reason: "iteration limit reached".into(),
                });
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                self.compute_basic_values();
            }
            let y = self.duals(cost);

            // Pricing.
            let mut entering: Option<(usize, f64)> = None;
            let mut best_score = 0.0;
            for j in 0..n_total {
                let st = self.state[j];
                if matches!(st, VarState::Basic(_)) || self.lo[j] == self.up[j] {
                    continue;
                }
                let d = cost[j] - self.col_dot(j, &y);
                let dir = match st {
                    VarState::AtLower if d < -self.tol_opt => 1.0,
                    VarState::AtUpper if d > self.tol_opt => -1.0,
                    VarState::Free if d.abs() > self.tol_opt => -d.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if d.abs() > best_score {
                    best_score = d.abs();
                    entering = Some((j, dir));
                }
            }
            let Some((q, dir)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            self.iterations += 1;

            let alpha = self.ftran(q);
            let obj_before = self.objective(cost);

            // Harris two-pass ratio test. Basic i moves by -dir * alpha_i per unit step.
            let mut theta_max = f64::INFINITY;
            for r in 0..self.m {
                let delta = -dir * alpha[r];
                if delta.abs() <= PIVOT_TOL {
                    continue;
                }
                let jb = self.basis[r];
                let ratio = if delta < 0.0 {
                    if !self.lo[jb].is_finite() {
                        continue;
                    }
                    (self.x[jb] - self.lo[jb] + self.tol_feas) / -delta
                } else {
                    if !self.up[jb].is_finite() {
                        continue;
                    }
                    (self.up[jb] - self.x[jb] + self.tol_feas) / delta
                };
                theta_max = theta_max.min(ratio);
            }
            let flip_range = self.up[q] - self.lo[q];
            if theta_max == f64::INFINITY && !flip_range.is_finite() {
                return Ok(PhaseEnd::Unbounded);
            }

            let mut leave: Option<(usize, f64, bool)> = None; // (row, step, to_lower)
            if theta_max.is_finite() {
                let mut best_piv = 0.0;
                let mut best_var = usize::MAX;
                let mut best_exact = f64::INFINITY;
                for r in 0..self.m {
                    let delta = -dir * alpha[r];
                    if delta.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let jb = self.basis[r];
                    let (exact, to_lower) = if delta < 0.0 {
                        if !self.lo[jb].is_finite() {
                            continue;
                        }
                        ((self.x[jb] - self.lo[jb]) / -delta, true)
                    } else {
                        if !self.up[jb].is_finite() {
                            continue;
                        }
                        ((self.up[jb] - self.x[jb]) / delta, false)
                    };
                    let take = if bland {
                        exact < best_exact - 1e-12 || ((exact - best_exact).abs() <= 1e-12 && jb < best_var)
                    } else {
                        exact <= theta_max && delta.abs() > best_piv
                    };
                    if take {
                        best_piv = delta.abs();
                        best_var = jb;
                        best_exact = exact;
                        leave = Some((r, exact.max(0.0), to_lower));
                    }
                }
            }

            let step = leave.map(|l| l.1).unwrap_or(f64::INFINITY);
            if flip_range.is_finite() && flip_range <= step {
                // Bound flip, basis unchanged.
                self.x[q] = if dir > 0.0 { self.up[q] } else { self.lo[q] };
                self.state[q] = if dir > 0.0 {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
            } else {
                let Some((r, step, to_lower)) = leave else {
                    return Ok(PhaseEnd::Unbounded);
                };
                let jl = self.basis[r];
                self.x[q] += dir * step;
                self.state[jl] = if to_lower { VarState::AtLower } else { VarState::AtUpper };
                self.x[jl] = if to_lower { self.lo[jl] } else { self.up[jl] };
                self.state[q] = VarState::Basic(r);
                self.basis[r] = q;
                self.pivot_update(r, &alpha);
            }

            self.compute_basic_values();
            let obj_after = self.objective(cost);
            if obj_after < obj_before - 1e-12 * (1.0 + obj_before.abs()) {
                degenerate = 0;
                bland = false;
            } else {
                degenerate += 1;
                if degenerate >= DEGENERATE_RUN {
                    bland = true;
                }
            }
        }
    }

    /// Pivot basic artificials (all at zero after phase one) out of the basis.
    fn drive_out_artificials(&mut self) -> Result<(), SolverError> {
        let m = self.m;
        for r in 0..m {
            let ja = self.basis[r];
            if !self.is_artificial[ja] {
                continue;
            }
            let row = &self.binv[r * m..(r + 1) * m];
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.cols.len() {
                if self.is_artificial[j] || matches!(self.state[j], VarState::Basic(_)) {
                    continue;
                }
                let v: f64 = self.cols[j].iter().map(|&(i, a)| a * row[i]).sum();
                if v.abs() > 1e-7 && best.map_or(true, |(_, bv)| v.abs() > bv.abs()) {
                    best = Some((j, v));
                }
            }
            if let Some((q, _)) = best {
                let alpha = self.ftran(q);
                self.state[ja] = VarState::AtLower;
                self.x[ja] = 0.0;
                self.state[q] = VarState::Basic(r);
                self.basis[r] = q;
                self.pivot_update(r, &alpha);
            }
            // Otherwise the row is redundant; the artificial stays basic at zero.
        }
        self.refactor()?;
        self.compute_basic_values();
        Ok(())
    }
}
