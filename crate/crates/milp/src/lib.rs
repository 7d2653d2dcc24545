//! Small dense LP/MILP solver.
//!
//! [`solve_lp`] runs a bounded primal simplex on a [`LinearModel`];
//! [`solve_milp`] adds best-first branch-and-bound over its binary variables.
//! Both are deterministic: the same model always yields the same result.

mod branch;
mod error;
mod model;
mod simplex;

pub use branch::MilpOptions;
pub use error::{ModelError, SolveError};
pub use model::{Constraint, LinearModel, Relation, Sense, VarId, VarKind, Variable};
pub use simplex::{SimplexOptions, FEASIBILITY_TOL, INTEGRALITY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// Branch-and-bound stopped at the node limit; the values are the best
    /// integer-feasible solution found so far.
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: Status,
    /// Objective value in the model's sense; NaN unless a solution is held.
    pub objective: f64,
    /// One value per model variable; empty when no solution is held.
    pub values: Vec<f64>,
    pub iterations: usize,
    pub nodes: usize,
}

impl SolveResult {
    fn empty(status: Status, iterations: usize, nodes: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            values: Vec::new(),
            iterations,
            nodes,
        }
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.index()]
    }

    pub fn has_solution(&self) -> bool {
        matches!(self.status, Status::Optimal | Status::NodeLimit)
    }
}

/// Solves a model without binary variables.
pub fn solve_lp(model: &LinearModel) -> Result<SolveResult, SolveError> {
    solve_lp_with(model, &SimplexOptions::default())
}

pub fn solve_lp_with(model: &LinearModel, opts: &SimplexOptions) -> Result<SolveResult, SolveError> {
    model.validate()?;
    if model.has_binaries() {
        return Err(SolveError::HasBinaries);
    }
    let lower: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();
    let out = simplex::solve_bounded(model, &lower, &upper, opts, true)?;
    let status = match out.status {
        simplex::LpStatus::Optimal => Status::Optimal,
        simplex::LpStatus::Infeasible => Status::Infeasible,
        simplex::LpStatus::Unbounded => Status::Unbounded,
    };
    Ok(SolveResult {
        status,
        objective: out.objective,
        values: out.values,
        iterations: out.iterations,
        nodes: 0,
    })
}

/// Solves a mixed-binary model. Models without binaries are solved as LPs.
pub fn solve_milp(model: &LinearModel) -> Result<SolveResult, SolveError> {
    solve_milp_with(model, &MilpOptions::default())
}

pub fn solve_milp_with(model: &LinearModel, opts: &MilpOptions) -> Result<SolveResult, SolveError> {
    model.validate()?;
    if !model.has_binaries() {
        return solve_lp_with(model, &opts.simplex);
    }
    branch::branch_and_bound(model, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() <= 1e-7, "{a} != {b}");
    }

    #[test]
    fn single_active_constraint() {
        let mut m = LinearModel::new("t");
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        let y = m.add_continuous("y", 0.0, f64::INFINITY);
        m.set_objective(x, 1.0);
        m.set_objective(y, 1.0);
        m.add_constraint("c", [(x, 1.0), (y, 1.0)], Relation::Le, 1.0);
        let r = solve_lp(&m).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert_close(r.objective, 1.0);
    }

    #[test]
    fn redundant_constraint() {
        let mut m = LinearModel::new("t");
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        m.set_objective(x, 1.0);
        m.add_constraint("a", [(x, 1.0)], Relation::Le, 5.0);
        m.add_constraint("b", [(x, 1.0)], Relation::Le, 3.0);
        let r = solve_lp(&m).unwrap();
        assert_close(r.value(x), 3.0);
    }

    #[test]
    fn two_dimensional_polytope_matches_vertex_enumeration() {
        let mut m = LinearModel::new("t");
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        let y = m.add_continuous("y", 0.0, f64::INFINITY);
        m.set_objective(x, 3.0);
        m.set_objective(y, 2.0);
        m.add_constraint("a", [(x, 1.0), (y, 1.0)], Relation::Le, 4.0);
        m.add_constraint("b", [(x, 1.0), (y, 3.0)], Relation::Le, 6.0);
        let r = solve_lp(&m).unwrap();

        // Intersect every pair of the four boundary lines and keep feasible points.
        let lines: [(f64, f64, f64); 4] = [(1.0, 1.0, 4.0), (1.0, 3.0, 6.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)];
        let mut best = f64::NEG_INFINITY;
        for i in 0..lines.len() {
            for k in i + 1..lines.len() {
                let (a1, b1, c1) = lines[i];
                let (a2, b2, c2) = lines[k];
                let det = a1 * b2 - a2 * b1;
                if det.abs() < 1e-12 {
                    continue;
                }
                let px = (c1 * b2 - c2 * b1) / det;
                let py = (a1 * c2 - a2 * c1) / det;
                let feasible = px >= -1e-9 && py >= -1e-9 && px + py <= 4.0 + 1e-9 && px + 3.0 * py <= 6.0 + 1e-9;
                if feasible {
                    best = best.max(3.0 * px + 2.0 * py);
                }
            }
        }
        assert_close(r.objective, best);
        assert_close(r.objective, 12.0);
        assert_close(r.value(x), 4.0);
        assert_close(r.value(y), 0.0);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut m = LinearModel::new("t");
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        m.set_objective(x, 1.0);
        m.add_constraint("a", [(x, 1.0)], Relation::Ge, 2.0);
        assert_eq!(solve_lp(&m).unwrap().status, Status::Unbounded);
        m.add_constraint("b", [(x, 1.0)], Relation::Le, 1.0);
        assert_eq!(solve_lp(&m).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn equality_and_free_variables() {
        // min |x - 3| style: minimize t with t >= x - 3, t >= 3 - x, x free, x + y = 5, y in [0, 1].
        let mut m = LinearModel::new("t");
        m.set_sense(Sense::Minimize);
        let x = m.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY);
        let y = m.add_continuous("y", 0.0, 1.0);
        let t = m.add_continuous("t", 0.0, f64::INFINITY);
        m.set_objective(t, 1.0);
        m.add_constraint("p", [(t, 1.0), (x, -1.0)], Relation::Ge, -3.0);
        m.add_constraint("n", [(t, 1.0), (x, 1.0)], Relation::Ge, 3.0);
        m.add_constraint("s", [(x, 1.0), (y, 1.0)], Relation::Eq, 5.0);
        let r = solve_lp(&m).unwrap();
        assert_close(r.objective, 1.0);
        assert_close(r.value(x), 4.0);
    }

    #[test]
    fn negative_lower_bounds_shift() {
        let mut m = LinearModel::new("t");
        let x = m.add_continuous("x", -5.0, -1.0);
        m.set_objective(x, -1.0);
        let r = solve_lp(&m).unwrap();
        assert_close(r.value(x), -5.0);
        assert_close(r.objective, 5.0);
    }

    #[test]
    fn lp_rejects_binaries() {
        let mut m = LinearModel::new("t");
        m.add_binary("b");
        assert_eq!(solve_lp(&m), Err(SolveError::HasBinaries));
    }

    #[test]
    fn unconstrained_binary() {
        let mut m = LinearModel::new("t");
        let b = m.add_binary("b");
        m.set_objective(b, 1.0);
        let r = solve_milp(&m).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert_close(r.objective, 1.0);
    }

    #[test]
    fn knapsack_of_two() {
        let mut m = LinearModel::new("t");
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.set_objective(a, 5.0);
        m.set_objective(b, 4.0);
        m.add_constraint("c", [(a, 1.0), (b, 1.0)], Relation::Le, 1.0);
        let r = solve_milp(&m).unwrap();
        assert_close(r.objective, 5.0);
        assert_close(r.value(a), 1.0);
    }

    #[test]
    fn eight_item_knapsack_matches_enumeration() {
        let values = [15.0, 10.0, 9.0, 5.0, 7.0, 12.0, 3.0, 8.0];
        let weights = [7.0, 5.0, 4.0, 3.0, 4.0, 6.0, 1.0, 5.0];
        let cap = 17.0;
        let mut m = LinearModel::new("knap");
        let vars: Vec<_> = (0..8).map(|i| m.add_binary(format!("b{i}"))).collect();
        for (i, &v) in vars.iter().enumerate() {
            m.set_objective(v, values[i]);
        }
        m.add_constraint("cap", vars.iter().zip(weights).map(|(&v, w)| (v, w)), Relation::Le, cap);
        let r = solve_milp(&m).unwrap();

        let mut best = 0.0f64;
        for mask in 0u32..256 {
            let (mut val, mut wt) = (0.0, 0.0);
            for i in 0..8 {
                if mask & (1 << i) != 0 {
                    val += values[i];
                    wt += weights[i];
                }
            }
            if wt <= cap {
                best = best.max(val);
            }
        }
        assert_close(r.objective, best);
        assert!(m.max_violation(&r.values) <= FEASIBILITY_TOL);
    }

    #[test]
    fn node_limit_keeps_incumbent_or_errors() {
        let mut m = LinearModel::new("t");
        let vars: Vec<_> = (0..6).map(|i| m.add_binary(format!("b{i}"))).collect();
        for &v in &vars {
            m.set_objective(v, 1.0);
        }
        m.add_constraint("c", vars.iter().map(|&v| (v, 2.0)), Relation::Le, 5.0);
        let opts = MilpOptions {
            node_limit: 1,
            ..MilpOptions::default()
        };
        match solve_milp_with(&m, &opts) {
            Ok(r) => assert_eq!(r.status, Status::NodeLimit),
            Err(e) => assert_eq!(e, SolveError::NodeLimit { limit: 1 }),
        }
        let full = solve_milp(&m).unwrap();
        assert_close(full.objective, 2.0);
    }
}
