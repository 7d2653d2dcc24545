//! Best-first branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::SolveError;
use crate::model::{LinearModel, Sense};
use crate::simplex::{solve_bounded, LpOutcome, LpStatus, SimplexOptions, INTEGRALITY_TOL};
use crate::{SolveResult, Status};

#[derive(Debug, Clone, PartialEq)]
pub struct MilpOptions {
    pub simplex: SimplexOptions,
    pub integrality_tol: f64,
    /// Maximum number of branch-and-bound nodes to expand.
    pub node_limit: usize,
    /// A node is pruned when its bound does not beat the incumbent by more
    /// than this (absolute, scaled by `max(1, |incumbent|)`).
    pub prune_tol: f64,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            simplex: SimplexOptions::default(),
            integrality_tol: INTEGRALITY_TOL,
            node_limit: 100_000,
            prune_tol: 1e-9,
        }
    }
}

struct Node {
    /// LP bound in maximization form.
    bound: f64,
    id: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    lp: LpOutcome,
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
    // Max-heap: larger bound first, then the older node.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Incumbent {
    score: f64,
    objective: f64,
    values: Vec<f64>,
}

pub(crate) fn branch_and_bound(model: &LinearModel, opts: &MilpOptions) -> Result<SolveResult, SolveError> {
    let sign = match model.sense() {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    let binaries: Vec<usize> = model.binaries().map(|v| v.index()).collect();
    let lower0: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
    let upper0: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();

    let mut iterations = 0usize;
    let root = solve_bounded(model, &lower0, &upper0, &opts.simplex, false)?;
    iterations += root.iterations;
    match root.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(SolveResult::empty(Status::Infeasible, iterations, 1)),
        LpStatus::Unbounded => return Ok(SolveResult::empty(Status::Unbounded, iterations, 1)),
    }

    let mut heap = BinaryHeap::new();
    let mut next_id = 1usize;
    heap.push(Node {
        bound: sign * root.objective,
        id: 0,
        lower: lower0,
        upper: upper0,
        lp: root,
    });
    let mut incumbent: Option<Incumbent> = None;
    let mut nodes = 0usize;
    let beats = |bound: f64, inc: &Option<Incumbent>, tol: f64| match inc {
        None => true,
        Some(i) => bound > i.score + tol * i.score.abs().max(1.0),
    };

    while let Some(node) = heap.pop() {
        if !beats(node.bound, &incumbent, opts.prune_tol) {
            continue;
        }
        if nodes >= opts.node_limit {
            return match incumbent {
                Some(inc) => Ok(SolveResult {
                    status: Status::NodeLimit,
                    objective: inc.objective,
                    values: inc.values,
                    iterations,
                    nodes,
                }),
                None => Err(SolveError::NodeLimit { limit: opts.node_limit }),
            };
        }
        nodes += 1;

        // Most fractional binary, smallest index on ties.
        let mut branch: Option<(usize, f64)> = None;
        for &j in &binaries {
            let x = node.lp.values[j];
            let frac = (x - x.floor()).min(x.ceil() - x);
            if frac > opts.integrality_tol && branch.map_or(true, |(_, f)| frac > f) {
                branch = Some((j, frac));
            }
        }

        let Some((j, _)) = branch else {
            // Integral: re-solve with binaries pinned to clean values.
            let mut lo = node.lower.clone();
            let mut hi = node.upper.clone();
            for &b in &binaries {
                let r = node.lp.values[b].round();
                lo[b] = r;
                hi[b] = r;
            }
            let polished = solve_bounded(model, &lo, &hi, &opts.simplex, true)?;
            iterations += polished.iterations;
            let (objective, values) = if polished.status == LpStatus::Optimal {
                (polished.objective, polished.values)
            } else {
                let mut v = node.lp.values.clone();
                for &b in &binaries {
                    v[b] = v[b].round();
                }
                (model.evaluate_objective(&v), v)
            };
            let score = sign * objective;
            if incumbent.as_ref().map_or(true, |i| score > i.score) {
                incumbent = Some(Incumbent { score, objective, values });
            }
            continue;
        };

        for fix in [0.0, 1.0] {
            let mut lo = node.lower.clone();
            let mut hi = node.upper.clone();
            lo[j] = fix;
            hi[j] = fix;
            let lp = solve_bounded(model, &lo, &hi, &opts.simplex, false)?;
            iterations += lp.iterations;
            if lp.status != LpStatus::Optimal {
                continue;
            }
            let bound = sign * lp.objective;
            if beats(bound, &incumbent, opts.prune_tol) {
                heap.push(Node {
                    bound,
                    id: next_id,
                    lower: lo,
                    upper: hi,
                    lp,
                });
                next_id += 1;
            }
        }
    }

    Ok(match incumbent {
        Some(inc) => SolveResult {
            status: Status::Optimal,
            objective: inc.objective,
            values: inc.values,
            iterations,
            nodes,
        },
        None => SolveResult::empty(Status::Infeasible, iterations, nodes),
    })
}
