//! Dense-tableau primal simplex with native variable bounds.
//!
//! Every structural column is shifted so that its lower bound is zero. Upper
//! bounds are handled by complementing columns (`x = u - x'`) so that every
//! nonbasic column always sits at zero in the working space. Phase one drives
//! artificial columns to zero; phase two optimizes the real objective with the
//! artificials pinned to zero.

use crate::error::SolveError;
use crate::model::{LinearModel, Relation, Sense};

/// Constraint satisfaction tolerance used by both solvers.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Distance from 0/1 under which a binary counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// Defaults to `50 * (rows + columns)` when unset.
    pub max_iterations: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: FEASIBILITY_TOL,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub(crate) struct LpOutcome {
    pub status: LpStatus,
    /// Values of the model variables (empty unless optimal).
    pub values: Vec<f64>,
    /// Objective in the model's own sense (meaningful only when optimal).
    pub objective: f64,
    pub iterations: usize,
}

/// How a working column maps back onto a model variable:
/// `x[var] += offset + sign * column_value`.
#[derive(Debug, Clone, Copy)]
struct ColumnMap {
    var: usize,
    sign: f64,
}

struct Tableau {
    m: usize,
    n: usize,
    t: Vec<f64>,
    rhs: Vec<f64>,
    ub: Vec<f64>,
    flipped: Vec<bool>,
    basis: Vec<usize>,
    in_basis: Vec<Option<usize>>,
    d: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
}

enum RunEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.n + c]
    }

    fn flip(&mut self, col: usize) {
        let u = self.ub[col];
        for r in 0..self.m {
            let idx = r * self.n + col;
            let a = self.t[idx];
            if a != 0.0 {
                self.rhs[r] -= a * u;
                self.t[idx] = -a;
            }
        }
        self.d[col] = -self.d[col];
        self.flipped[col] = !self.flipped[col];
    }

    /// Complements the basic column of row `r` so that it leaves at zero.
    fn complement_basic_row(&mut self, r: usize) {
        let b = self.basis[r];
        let u = self.ub[b];
        let row = &mut self.t[r * self.n..(r + 1) * self.n];
        for (c, a) in row.iter_mut().enumerate() {
            if c != b {
                *a = -*a;
            }
        }
        self.rhs[r] = u - self.rhs[r];
        self.flipped[b] = !self.flipped[b];
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.n;
        let piv = self.t[r * n + q];
        let inv = 1.0 / piv;
        {
            let row = &mut self.t[r * n..(r + 1) * n];
            for a in row.iter_mut() {
                *a *= inv;
            }
            row[q] = 1.0;
        }
        self.rhs[r] *= inv;
        let (before, rest) = self.t.split_at_mut(r * n);
        let (prow, after) = rest.split_at_mut(n);
        let prhs = self.rhs[r];
        for (i, row) in before.chunks_exact_mut(n).chain(after.chunks_exact_mut(n)).enumerate() {
            let i = if i < r { i } else { i + 1 };
            let f = row[q];
            if f != 0.0 {
                for (a, p) in row.iter_mut().zip(prow.iter()) {
                    *a -= f * p;
                }
                row[q] = 0.0;
                self.rhs[i] -= f * prhs;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (dj, p) in self.d.iter_mut().zip(prow.iter()) {
                *dj -= f * p;
            }
            self.d[q] = 0.0;
        }
        let old = self.basis[r];
        self.in_basis[old] = None;
        self.basis[r] = q;
        self.in_basis[q] = Some(r);
    }

    fn price(&mut self, cost: &[f64]) {
        let cur: Vec<f64> = cost
            .iter()
            .zip(&self.flipped)
            .map(|(&c, &f)| if f { -c } else { c })
            .collect();
        self.d.copy_from_slice(&cur);
        for r in 0..self.m {
            let cb = cur[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * self.n..(r + 1) * self.n];
                for (dj, a) in self.d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    fn run(&mut self, cost: &[f64], enterable: &[bool], opts: &SimplexOptions) -> Result<RunEnd, SolveError> {
        self.price(cost);
        let mut bland = false;
        let mut stalled = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(SolveError::Numerical {
                    iterations: self.iterations,
                    reason: "iteration limit reached".into(),
                });
            }
            // Entering column.
            let mut q = None;
            let mut best = opts.optimality_tol;
            for j in 0..self.n {
                if !enterable[j] || self.in_basis[j].is_some() || self.ub[j] <= 0.0 {
                    continue;
                }
                let dj = self.d[j];
                if dj > best {
                    q = Some(j);
                    if bland {
                        break;
                    }
                    best = dj;
                }
            }
            let Some(q) = q else {
                return Ok(RunEnd::Optimal);
            };

            // Ratio test.
            let mut t_min = f64::INFINITY;
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_alpha = 0.0;
            for r in 0..self.m {
                let a = self.at(r, q);
                let (t, to_upper) = if a > opts.pivot_tol {
                    (self.rhs[r].max(0.0) / a, false)
                } else if a < -opts.pivot_tol {
                    let ubb = self.ub[self.basis[r]];
                    if ubb.is_finite() {
                        ((ubb - self.rhs[r]).max(0.0) / -a, true)
                    } else {
                        continue;
                    }
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((lr, _)) => {
                        let tie = (t - t_min).abs() <= 1e-12 * (1.0 + t_min.abs());
                        if tie {
                            if bland {
                                self.basis[r] < self.basis[lr]
                            } else {
                                a.abs() > leave_alpha
                            }
                        } else {
                            t < t_min
                        }
                    }
                };
                if better {
                    t_min = t;
                    leave = Some((r, to_upper));
                    leave_alpha = a.abs();
                }
            }

            self.iterations += 1;
            let dq = self.d[q];
            let own = self.ub[q];
            let step;
            if own <= t_min {
                if !own.is_finite() {
                    return Ok(RunEnd::Unbounded);
                }
                step = own;
                self.flip(q);
            } else {
                let Some((r, to_upper)) = leave else {
                    return Ok(RunEnd::Unbounded);
                };
                step = t_min;
                if to_upper {
                    self.complement_basic_row(r);
                }
                self.pivot(r, q);
            }

            if step * dq <= 1e-12 {
                stalled += 1;
                if stalled > self.m {
                    bland = true;
                }
            } else {
                stalled = 0;
                bland = false;
            }
        }
    }

    fn column_values(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for j in 0..self.n {
            if self.flipped[j] && self.in_basis[j].is_none() {
                x[j] = self.ub[j];
            }
        }
        for (r, &b) in self.basis.iter().enumerate() {
            x[b] = if self.flipped[b] { self.ub[b] - self.rhs[r] } else { self.rhs[r] };
        }
        x
    }
}

/// Solves the LP relaxation of `model` with per-variable bounds overridden by
/// `lower`/`upper`. When `refine` is set, the final basic solution is
/// recomputed from the original matrix to strip accumulated pivot error.
pub(crate) fn solve_bounded(
    model: &LinearModel,
    lower: &[f64],
    upper: &[f64],
    opts: &SimplexOptions,
    refine: bool,
) -> Result<LpOutcome, SolveError> {
    let infeasible = |iterations| LpOutcome {
        status: LpStatus::Infeasible,
        values: Vec::new(),
        objective: f64::NAN,
        iterations,
    };
    let nv = model.num_vars();
    let sense = match model.sense() {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };

    // Structural columns.
    let mut cols: Vec<ColumnMap> = Vec::with_capacity(nv);
    let mut var_cols: Vec<(usize, Option<usize>)> = Vec::with_capacity(nv);
    let mut offsets = vec![0.0; nv];
    let mut col_ub: Vec<f64> = Vec::with_capacity(nv);
    for j in 0..nv {
        let (lo, hi) = (lower[j], upper[j]);
        if lo > hi + opts.feasibility_tol {
            return Ok(infeasible(0));
        }
        if lo.is_finite() {
            offsets[j] = lo;
            var_cols.push((cols.len(), None));
            cols.push(ColumnMap { var: j, sign: 1.0 });
            col_ub.push((hi - lo).max(0.0));
        } else if hi.is_finite() {
            offsets[j] = hi;
            var_cols.push((cols.len(), None));
            cols.push(ColumnMap { var: j, sign: -1.0 });
            col_ub.push(f64::INFINITY);
        } else {
            var_cols.push((cols.len(), Some(cols.len() + 1)));
            cols.push(ColumnMap { var: j, sign: 1.0 });
            cols.push(ColumnMap { var: j, sign: -1.0 });
            col_ub.push(f64::INFINITY);
            col_ub.push(f64::INFINITY);
        }
    }
    let ns = cols.len();

    // Rows in working form, scaled to unit max coefficient.
    struct Row {
        coefs: Vec<(usize, f64)>,
        slack: f64,
        rhs: f64,
    }
    let mut rows: Vec<Row> = Vec::with_capacity(model.num_constraints());
    for c in model.constraints() {
        let mut coefs: Vec<(usize, f64)> = Vec::with_capacity(c.terms.len() + 1);
        let mut rhs = c.rhs;
        for &(v, a) in &c.terms {
            if a == 0.0 {
                continue;
            }
            let j = v.index();
            rhs -= a * offsets[j];
            let (c1, c2) = var_cols[j];
            coefs.push((c1, a * cols[c1].sign));
            if let Some(c2) = c2 {
                coefs.push((c2, a * cols[c2].sign));
            }
        }
        let scale = coefs.iter().map(|(_, a)| a.abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            let ok = match c.relation {
                Relation::Le => rhs >= -opts.feasibility_tol,
                Relation::Ge => rhs <= opts.feasibility_tol,
                Relation::Eq => rhs.abs() <= opts.feasibility_tol,
            };
            if ok {
                continue;
            }
            return Ok(infeasible(0));
        }
        let inv = 1.0 / scale;
        for (_, a) in &mut coefs {
            *a *= inv;
        }
        rhs *= inv;
        let mut slack = match c.relation {
            Relation::Le => 1.0,
            Relation::Ge => -1.0,
            Relation::Eq => 0.0,
        };
        if rhs < 0.0 {
            rhs = -rhs;
            slack = -slack;
            for (_, a) in &mut coefs {
                *a = -*a;
            }
        }
        rows.push(Row { coefs, slack, rhs });
    }
    let m = rows.len();

    // Column counts for the crash basis.
    let mut nnz = vec![0usize; ns];
    for row in &rows {
        for &(c, _) in &row.coefs {
            nnz[c] += 1;
        }
    }
    let n_slack = rows.iter().filter(|r| r.slack != 0.0).count();
    let mut basis = vec![usize::MAX; m];
    let mut crash_used = vec![false; ns];
    let mut needs_art = Vec::new();
    let mut slack_col = vec![None; m];
    let mut next = ns;
    for (r, row) in rows.iter().enumerate() {
        if row.slack != 0.0 {
            slack_col[r] = Some(next);
            if row.slack > 0.0 {
                basis[r] = next;
            }
            next += 1;
        }
    }
    for (r, row) in rows.iter().enumerate() {
        if basis[r] != usize::MAX {
            continue;
        }
        let crash = row.coefs.iter().find(|&&(c, a)| {
            nnz[c] == 1 && a > 0.0 && !crash_used[c] && row.rhs / a <= col_ub[c]
        });
        match crash {
            Some(&(c, _)) => {
                basis[r] = c;
                crash_used[c] = true;
            }
            None => needs_art.push(r),
        }
    }
    let n_art = needs_art.len();
    let n = ns + n_slack + n_art;

    let mut t = vec![0.0; m * n];
    let mut rhs = vec![0.0; m];
    for (r, row) in rows.iter().enumerate() {
        for &(c, a) in &row.coefs {
            t[r * n + c] += a;
        }
        if let Some(sc) = slack_col[r] {
            t[r * n + sc] = row.slack;
        }
        rhs[r] = row.rhs;
    }
    for (k, &r) in needs_art.iter().enumerate() {
        let c = ns + n_slack + k;
        t[r * n + c] = 1.0;
        basis[r] = c;
    }
    // Crash columns need unit coefficients in their row.
    for r in 0..m {
        let b = basis[r];
        let a = t[r * n + b];
        if a != 1.0 {
            let inv = 1.0 / a;
            for v in &mut t[r * n..(r + 1) * n] {
                *v *= inv;
            }
            rhs[r] *= inv;
            t[r * n + b] = 1.0;
        }
    }
    let original = if refine { Some((t.clone(), rhs.clone())) } else { None };

    let mut ub = col_ub;
    ub.resize(n, f64::INFINITY);
    let mut in_basis = vec![None; n];
    for (r, &b) in basis.iter().enumerate() {
        in_basis[b] = Some(r);
    }
    let max_iterations = opts.max_iterations.unwrap_or(50 * (m + n) + 1000);
    let mut tab = Tableau {
        m,
        n,
        t,
        rhs,
        ub,
        flipped: vec![false; n],
        basis,
        in_basis,
        d: vec![0.0; n],
        iterations: 0,
        max_iterations,
    };

    let art_start = ns + n_slack;
    if n_art > 0 {
        let mut cost = vec![0.0; n];
        for c in cost.iter_mut().skip(art_start) {
            *c = -1.0;
        }
        let enterable = vec![true; n];
        tab.run(&cost, &enterable, opts)?;
        let infeas: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= art_start)
            .map(|(r, _)| tab.rhs[r])
            .sum();
        if infeas > opts.feasibility_tol {
            return Ok(infeasible(tab.iterations));
        }
        for c in art_start..n {
            tab.ub[c] = 0.0;
        }
    }

    let mut cost = vec![0.0; n];
    for (c, map) in cols.iter().enumerate() {
        cost[c] = sense * map.sign * model.objective()[map.var];
    }
    let cmax = cost.iter().map(|c| c.abs()).fold(0.0, f64::max);
    if cmax > 0.0 {
        for c in &mut cost {
            *c /= cmax;
        }
    }
    let mut enterable = vec![true; n];
    for e in enterable.iter_mut().skip(art_start) {
        *e = false;
    }
    match tab.run(&cost, &enterable, opts)? {
        RunEnd::Optimal => {}
        RunEnd::Unbounded => {
            return Ok(LpOutcome {
                status: LpStatus::Unbounded,
                values: Vec::new(),
                objective: f64::NAN,
                iterations: tab.iterations,
            })
        }
    }

    let mut xcol = tab.column_values();
    if let Some((a0, b0)) = original {
        if let Some(refined) = refine_basic(&tab, &a0, &b0) {
            let ok = refined.iter().enumerate().all(|(r, &v)| {
                let b = tab.basis[r];
                v >= -opts.feasibility_tol && v <= tab.ub[b] + opts.feasibility_tol
            });
            if ok {
                for (r, &v) in refined.iter().enumerate() {
                    xcol[tab.basis[r]] = v;
                }
            }
        }
    }

    let mut values = offsets;
    for (c, map) in cols.iter().enumerate() {
        values[map.var] += map.sign * xcol[c];
    }
    for (j, v) in values.iter_mut().enumerate() {
        let (lo, hi) = (lower[j], upper[j]);
        if *v < lo && *v >= lo - opts.feasibility_tol {
            *v = lo;
        }
        if *v > hi && *v <= hi + opts.feasibility_tol {
            *v = hi;
        }
    }
    let objective = model.evaluate_objective(&values);
    Ok(LpOutcome {
        status: LpStatus::Optimal,
        values,
        objective,
        iterations: tab.iterations,
    })
}

/// Solves `B x_B = b - N_u u_N` against the untouched starting matrix.
fn refine_basic(tab: &Tableau, a0: &[f64], b0: &[f64]) -> Option<Vec<f64>> {
    let (m, n) = (tab.m, tab.n);
    let mut rhs = b0.to_vec();
    for j in 0..n {
        if tab.flipped[j] && tab.in_basis[j].is_none() && tab.ub[j] != 0.0 {
            let u = tab.ub[j];
            for r in 0..m {
                rhs[r] -= a0[r * n + j] * u;
            }
        }
    }
    let mut b = vec![0.0; m * m];
    for r in 0..m {
        for (k, &col) in tab.basis.iter().enumerate() {
            b[r * m + k] = a0[r * n + col];
        }
    }
    let x = lu_solve(&mut b, rhs.clone(), m)?;
    // One step of iterative refinement against the unfactored basis.
    let mut resid = rhs;
    for r in 0..m {
        let mut s = 0.0;
        for (k, &col) in tab.basis.iter().enumerate() {
            s += a0[r * n + col] * x[k];
        }
        resid[r] -= s;
    }
    let mut b2 = vec![0.0; m * m];
    for r in 0..m {
        for (k, &col) in tab.basis.iter().enumerate() {
            b2[r * m + k] = a0[r * n + col];
        }
    }
    let dx = lu_solve(&mut b2, resid, m)?;
    Some(x.iter().zip(dx).map(|(a, d)| a + d).collect())
}

/// Gaussian elimination with partial pivoting; `a` is overwritten.
fn lu_solve(a: &mut [f64], mut b: Vec<f64>, m: usize) -> Option<Vec<f64>> {
    for k in 0..m {
        let (p, pv) = (k..m)
            .map(|r| (r, a[r * m + k].abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pv < 1e-12 {
            return None;
        }
        if p != k {
            for c in 0..m {
                a.swap(k * m + c, p * m + c);
            }
            b.swap(k, p);
        }
        let piv = a[k * m + k];
        for r in (k + 1)..m {
            let f = a[r * m + k] / piv;
            if f != 0.0 {
                for c in k..m {
                    a[r * m + c] -= f * a[k * m + c];
                }
                b[r] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; m];
    for k in (0..m).rev() {
        let mut s = b[k];
        for c in (k + 1)..m {
            s -= a[k * m + c] * x[c];
        }
        x[k] = s / a[k * m + k];
    }
    Some(x)
}
