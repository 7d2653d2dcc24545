//! ε sweeps over the scalarized objective Z1 − ε·Z2 and non-dominated
//! extraction under (maximize Z1, minimize Z2).

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::report::{csv_number, format_sig};
use crate::stochastic::{estimate_objectives, CostBreakdown, EstimateResult, PlanError, Planner};

pub const SOLUTION_COLUMNS: [&str; 8] = [
    "epsilon",
    "Z1",
    "Z1_se",
    "Z2",
    "Z2_se",
    "inventory_cost",
    "unfulfilled_cost",
    "order_cost",
];

#[derive(Debug, Error)]
pub enum ParetoError {
    #[error("epsilon grid is empty")]
    EmptyGrid,
    #[error("epsilon {0} must be finite and non-negative")]
    InvalidEpsilon(f64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("solutions file has no rows")]
    NoSolutions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoSolution {
    pub epsilon: f64,
    pub z1: f64,
    pub z1_se: f64,
    pub z2: f64,
    pub z2_se: f64,
    pub costs: CostBreakdown,
    /// Where the solution's plan was written, if anywhere.
    pub plan: Option<String>,
}

impl ParetoSolution {
    pub fn from_estimate(est: &EstimateResult) -> Self {
        Self {
            epsilon: est.epsilon,
            z1: est.z1,
            z1_se: est.z1_se,
            z2: est.z2,
            z2_se: est.z2_se,
            costs: est.costs,
            plan: None,
        }
    }

    /// True if `self` is at least as good on both objectives and strictly better on one.
    pub fn dominates(&self, other: &Self) -> bool {
        self.z1 >= other.z1 && self.z2 <= other.z2 && (self.z1 > other.z1 || self.z2 < other.z2)
    }
}

/// Outcome of one grid point; failures are kept so a sweep never aborts.
#[derive(Debug)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub outcome: Result<EstimateResult, PlanError>,
}

/// Estimates every ε of `grid` with the same master seed, so all grid points
/// see the same scenarios.
pub fn sweep(planner: &Planner, grid: &[f64], replications: usize, seed: u64) -> Result<Vec<SweepPoint>, ParetoError> {
    if grid.is_empty() {
        return Err(ParetoError::EmptyGrid);
    }
    if let Some(&bad) = grid.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(ParetoError::InvalidEpsilon(bad));
    }
    Ok(grid
        .par_iter()
        .map(|&epsilon| SweepPoint {
            epsilon,
            outcome: estimate_objectives(planner, epsilon, replications, seed),
        })
        .collect())
}

/// Evenly spaced grid `lo..=hi` with `steps` points, or geometric when `log`.
pub fn epsilon_grid(lo: f64, hi: f64, steps: usize, log: bool) -> Result<Vec<f64>, ParetoError> {
    if steps == 0 {
        return Err(ParetoError::EmptyGrid);
    }
    for e in [lo, hi] {
        if !(e.is_finite() && e >= 0.0) || (log && e == 0.0) {
            return Err(ParetoError::InvalidEpsilon(e));
        }
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    let k = (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| {
            let s = i as f64 / k;
            if i == 0 {
                lo
            } else if i == steps - 1 {
                hi
            } else if log {
                (lo.ln() + s * (hi.ln() - lo.ln())).exp()
            } else {
                lo + s * (hi - lo)
            }
        })
        .collect())
}

/// Solutions collected from a sweep, with front membership flags.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolutionPool {
    pub solutions: Vec<ParetoSolution>,
    pub on_front: Vec<bool>,
}

impl SolutionPool {
    pub fn new(solutions: Vec<ParetoSolution>) -> Self {
        let mut pool = Self {
            on_front: vec![false; solutions.len()],
            solutions,
        };
        for i in extract_front(&pool.solutions) {
            pool.on_front[i] = true;
        }
        pool
    }

    /// Front members sorted by increasing Z2.
    pub fn front(&self) -> Vec<&ParetoSolution> {
        let mut f: Vec<&ParetoSolution> = self
            .solutions
            .iter()
            .zip(&self.on_front)
            .filter_map(|(s, &on)| on.then_some(s))
            .collect();
        f.sort_by(|a, b| a.z2.total_cmp(&b.z2));
        f
    }

    pub fn write_csv<W: Write>(&self, out: W, with_front_flag: bool) -> Result<(), ParetoError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = SOLUTION_COLUMNS.to_vec();
        if with_front_flag {
            header.push("on_front");
        }
        w.write_record(&header)?;
        for (s, &on) in self.solutions.iter().zip(&self.on_front) {
            let mut row: Vec<String> = [
                s.epsilon,
                s.z1,
                s.z1_se,
                s.z2,
                s.z2_se,
                s.costs.inventory,
                s.costs.unfulfilled,
                s.costs.order,
            ]
            .iter()
            .map(|&x| csv_number(x))
            .collect();
            if with_front_flag {
                row.push(u8::from(on).to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a solutions (or front) file; any `on_front` column is ignored
    /// and the front is recomputed.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, ParetoError> {
        #[derive(Deserialize)]
        struct Row {
            epsilon: f64,
            #[serde(rename = "Z1")]
            z1: f64,
            #[serde(rename = "Z1_se")]
            z1_se: f64,
            #[serde(rename = "Z2")]
            z2: f64,
            #[serde(rename = "Z2_se")]
            z2_se: f64,
            inventory_cost: f64,
            unfulfilled_cost: f64,
            order_cost: f64,
        }
        let mut r = csv::Reader::from_reader(input);
        let mut solutions = Vec::new();
        for row in r.deserialize() {
            let row: Row = row?;
            solutions.push(ParetoSolution {
                epsilon: row.epsilon,
                z1: row.z1,
                z1_se: row.z1_se,
                z2: row.z2,
                z2_se: row.z2_se,
                costs: CostBreakdown {
                    inventory: row.inventory_cost,
                    unfulfilled: row.unfulfilled_cost,
                    order: row.order_cost,
                },
                plan: None,
            });
        }
        if solutions.is_empty() {
            return Err(ParetoError::NoSolutions);
        }
        Ok(Self::new(solutions))
    }

    /// Scatter of all solutions (Z2 across, Z1 up) with front members filled
    /// and joined by a dashed line.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 480.0;
        const M: f64 = 70.0;
        let span = |vals: Vec<f64>| {
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo > 0.0 {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            } else {
                let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
                (lo - pad, hi + pad)
            }
        };
        let (x0, x1) = span(self.solutions.iter().map(|s| s.z2).collect());
        let (y0, y1) = span(self.solutions.iter().map(|s| s.z1).collect());
        let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
        let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
        let c = |v: f64| format!("{v:.2}");

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<path d="M{m} {top} V{b} H{r}" fill="none" stroke="black"/>"#,
            m = M,
            top = M,
            b = H - M,
            r = W - M
        );
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = x0 + f * (x1 - x0);
            let yv = y0 + f * (y1 - y0);
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                c(px(xv)),
                c(H - M + 18.0),
                format_sig(xv, 4)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                c(M - 6.0),
                c(py(yv) + 4.0),
                format_sig(yv, 4)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">Z2 (expected total cost)</text>"#,
            c(W / 2.0),
            c(H - 20.0)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">Z1 (expected food accessibility)</text>"#,
            c(H / 2.0),
            c(H / 2.0)
        );
        let front = self.front();
        if front.len() > 1 {
            let pts: Vec<String> = front.iter().map(|p| format!("{},{}", c(px(p.z2)), c(py(p.z1)))).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="firebrick" stroke-dasharray="6 4"/>"#,
                pts.join(" ")
            );
        }
        for (p, &on) in self.solutions.iter().zip(&self.on_front) {
            let (fill, stroke) = if on { ("firebrick", "firebrick") } else { ("none", "dimgray") };
            let _ = writeln!(
                s,
                r#"<circle cx="{}" cy="{}" r="4" fill="{fill}" stroke="{stroke}"><title>epsilon {}</title></circle>"#,
                c(px(p.z2)),
                c(py(p.z1)),
                format_sig(p.epsilon, 6)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Indices of the non-dominated solutions, ascending. Of several solutions at
/// the same (Z1, Z2), only the one with the lowest ε (then lowest index) is kept.
pub fn extract_front(solutions: &[ParetoSolution]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..solutions.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (&solutions[a], &solutions[b]);
        p.z2.total_cmp(&q.z2)
            .then(q.z1.total_cmp(&p.z1))
            .then(p.epsilon.total_cmp(&q.epsilon))
            .then(a.cmp(&b))
    });
    // Walking by increasing cost, a point survives iff it beats every cheaper
    // point on accessibility.
    let mut best = f64::NEG_INFINITY;
    let mut front = Vec::new();
    for i in order {
        if solutions[i].z1.partial_cmp(&best) == Some(Ordering::Greater) {
            best = solutions[i].z1;
            front.push(i);
        }
    }
    front.sort_unstable();
    front
}
