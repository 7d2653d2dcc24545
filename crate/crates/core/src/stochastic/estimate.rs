use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::period::{CostBreakdown, PeriodDecision, PeriodInput, Planner};
use super::scenario::sample_scenario;
use super::{mix_seed, PlanError};

/// One Monte Carlo replication: every period of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationResult {
    pub index: usize,
    pub seed: u64,
    pub periods: Vec<PeriodDecision>,
    /// φ^s = Σ_t φ_t^s.
    pub phi: f64,
    /// Σ_t Σ_i (−w^T·I^T + w^Q·I^Q).
    pub accessibility: f64,
    pub costs: CostBreakdown,
    /// Raw C^T summed over periods and regions.
    pub transport_effort: f64,
}

impl ReplicationResult {
    pub fn total_cost(&self) -> f64 {
        self.costs.total()
    }
}

/// Solves the horizon of one sampled scenario, threading inventory forward.
pub fn run_replication(planner: &Planner, epsilon: f64, index: usize, seed: u64) -> Result<ReplicationResult, PlanError> {
    let inst = planner.instance();
    let design = planner.design();
    let scenario = sample_scenario(inst, seed);
    let mut inventory = planner.initial_inventory().to_vec();
    let mut periods = Vec::with_capacity(inst.horizon);
    for t in 0..inst.horizon {
        let input = PeriodInput {
            period: t,
            inventory,
            demand: scenario.demands[t].clone(),
            factors: scenario.linked_factors(t, &design.dc_warehouse),
        };
        let decision = planner.solve_period(&input, epsilon, seed)?;
        inventory = decision.inventory.clone();
        periods.push(decision);
    }
    let mut costs = CostBreakdown::default();
    let mut phi = 0.0;
    let mut accessibility = 0.0;
    let mut transport_effort = 0.0;
    for p in &periods {
        costs += p.costs;
        phi += p.objective;
        accessibility += p.accessibility_value(inst);
        transport_effort += p.transport_effort;
    }
    Ok(ReplicationResult {
        index,
        seed,
        periods,
        phi,
        accessibility,
        costs,
        transport_effort,
    })
}

/// Sample standard deviation over √N; zero for a single sample.
pub fn standard_error(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub epsilon: f64,
    pub replications: usize,
    pub master_seed: u64,
    pub z1: f64,
    pub z1_se: f64,
    pub z2: f64,
    pub z2_se: f64,
    /// The first-stage affordability part of Z1.
    pub affordability: f64,
    pub costs: CostBreakdown,
    pub costs_se: CostBreakdown,
    /// Replications in index order.
    pub runs: Vec<ReplicationResult>,
}

impl EstimateResult {
    /// Z1 − ε·Z2.
    pub fn scalarized(&self) -> f64 {
        self.z1 - self.epsilon * self.z2
    }
}

/// Averages `n` replications. Replication `s` uses seed `mix_seed(master_seed, s)`,
/// so results do not depend on scheduling; sums run in replication order.
pub fn estimate_objectives(planner: &Planner, epsilon: f64, n: usize, master_seed: u64) -> Result<EstimateResult, PlanError> {
    if n == 0 {
        return Err(PlanError::NoReplications);
    }
    let affordability = planner.affordability_term()?;
    let runs: Vec<ReplicationResult> = (0..n)
        .into_par_iter()
        .map(|s| run_replication(planner, epsilon, s, mix_seed(master_seed, s as u64)))
        .collect::<Result<_, _>>()?;
    let acc: Vec<f64> = runs.iter().map(|r| r.accessibility).collect();
    let cost: Vec<f64> = runs.iter().map(|r| r.total_cost()).collect();
    let part = |f: fn(&CostBreakdown) -> f64| runs.iter().map(|r| f(&r.costs)).collect::<Vec<f64>>();
    let (inv, unf, ord) = (part(|c| c.inventory), part(|c| c.unfulfilled), part(|c| c.order));
    Ok(EstimateResult {
        epsilon,
        replications: n,
        master_seed,
        z1: affordability + mean(&acc),
        z1_se: standard_error(&acc),
        z2: mean(&cost),
        z2_se: standard_error(&cost),
        affordability,
        costs: CostBreakdown {
            inventory: mean(&inv),
            unfulfilled: mean(&unf),
            order: mean(&ord),
        },
        costs_se: CostBreakdown {
            inventory: standard_error(&inv),
            unfulfilled: standard_error(&unf),
            order: standard_error(&ord),
        },
        runs,
    })
}

/// Portable description of one solution: linkages, starting stock and the
/// mean per-period plan, with the optimizer's cost expectations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSummary {
    pub epsilon: f64,
    pub safety_stock_fraction: f64,
    pub replications: usize,
    pub master_seed: u64,
    pub dc_ids: Vec<String>,
    pub customer_ids: Vec<String>,
    /// Supplying warehouse id of each DC.
    pub dc_warehouse: Vec<String>,
    /// Supplying DC id of each customer.
    pub customer_dc: Vec<String>,
    pub initial_inventory: Vec<f64>,
    pub safety_stock: Vec<f64>,
    /// Mean over replications, `[t][h]` or `[t][l]`.
    pub mean_orders: Vec<Vec<f64>>,
    pub mean_inventory: Vec<Vec<f64>>,
    pub mean_shipped: Vec<Vec<f64>>,
    pub mean_unfulfilled: Vec<Vec<f64>>,
    pub z1: f64,
    pub z1_se: f64,
    pub z2: f64,
    pub z2_se: f64,
    pub expected_costs: CostBreakdown,
    pub expected_costs_se: CostBreakdown,
}

impl PlanSummary {
    pub fn from_estimate(planner: &Planner, est: &EstimateResult) -> Self {
        let inst = planner.instance();
        let design = planner.design();
        let dc_ids: Vec<String> = inst.dcs().map(|(_, d)| d.id.clone()).collect();
        let customer_ids: Vec<String> = inst.customers().map(|(_, c)| c.id.clone()).collect();
        let n = est.runs.len() as f64;
        let average = |f: &dyn Fn(&PeriodDecision) -> &Vec<f64>| -> Vec<Vec<f64>> {
            (0..inst.horizon)
                .map(|t| {
                    let width = f(&est.runs[0].periods[t]).len();
                    (0..width)
                        .map(|k| est.runs.iter().map(|r| f(&r.periods[t])[k]).sum::<f64>() / n)
                        .collect()
                })
                .collect()
        };
        Self {
            epsilon: est.epsilon,
            safety_stock_fraction: inst.safety_stock_fraction,
            replications: est.replications,
            master_seed: est.master_seed,
            dc_warehouse: design.dc_warehouse.iter().map(|&w| inst.warehouses[w].id.clone()).collect(),
            customer_dc: design.customer_dc.iter().map(|&h| dc_ids[h].clone()).collect(),
            dc_ids,
            customer_ids,
            initial_inventory: planner.initial_inventory().to_vec(),
            safety_stock: planner.safety_stock().to_vec(),
            mean_orders: average(&|p| &p.orders),
            mean_inventory: average(&|p| &p.inventory),
            mean_shipped: average(&|p| &p.shipped),
            mean_unfulfilled: average(&|p| &p.unfulfilled),
            z1: est.z1,
            z1_se: est.z1_se,
            z2: est.z2,
            z2_se: est.z2_se,
            expected_costs: est.costs,
            expected_costs_se: est.costs_se,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan summary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfa::{run_gfa, GfaConfig};
    use crate::model::NetworkInstance;
    use crate::stochastic::PlanConfig;

    fn deterministic_minimal() -> NetworkInstance {
        let mut inst = crate::fixtures::minimal();
        inst.stochastic.demand.variance = 0.0;
        inst.stochastic.supply_loss.low = 0.85;
        inst.stochastic.supply_loss.high = 0.85;
        inst
    }

    #[test]
    fn standard_error_examples() {
        assert_eq!(standard_error(&[3.0]), 0.0);
        assert_eq!(standard_error(&[2.0, 2.0, 2.0]), 0.0);
        // sd of {1, 3} is √2, over √2.
        assert!((standard_error(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_period_is_one_solve() {
        let mut inst = crate::fixtures::minimal();
        inst.horizon = 1;
        let design = run_gfa(&inst, &GfaConfig::default()).unwrap().design;
        let planner = Planner::new(&inst, &design, PlanConfig::default()).unwrap();
        let rep = run_replication(&planner, 0.01, 0, 5).unwrap();
        assert_eq!(rep.periods.len(), 1);
        let sc = sample_scenario(&inst, 5);
        let direct = planner
            .solve_period(
                &PeriodInput {
                    period: 0,
                    inventory: planner.initial_inventory().to_vec(),
                    demand: sc.demands[0].clone(),
                    factors: sc.linked_factors(0, &design.dc_warehouse),
                },
                0.01,
                5,
            )
            .unwrap();
        assert_eq!(rep.periods[0], direct);
        assert_eq!(rep.phi, direct.objective);
    }

    #[test]
    fn deterministic_scenario_repeats_exactly() {
        let inst = deterministic_minimal();
        let design = run_gfa(&inst, &GfaConfig::default()).unwrap().design;
        let planner = Planner::new(&inst, &design, PlanConfig::default()).unwrap();
        let a = run_replication(&planner, 0.01, 0, 1).unwrap();
        let b = run_replication(&planner, 0.01, 0, 2).unwrap();
        assert_eq!(a.periods, b.periods);
        let est = estimate_objectives(&planner, 0.01, 1, 9).unwrap();
        assert_eq!(est.z1_se, 0.0);
        assert_eq!(est.z2_se, 0.0);
        assert_eq!(est.z2, est.runs[0].total_cost());
        assert!((est.z1 - (est.affordability + est.runs[0].accessibility)).abs() < 1e-15);
    }

    #[test]
    fn balance_holds_over_horizon() {
        let inst = crate::fixtures::minimal();
        let design = run_gfa(&inst, &GfaConfig::default()).unwrap().design;
        let planner = Planner::new(&inst, &design, PlanConfig::default()).unwrap();
        let rep = run_replication(&planner, 0.01, 0, 77).unwrap();
        assert_eq!(rep.periods.len(), 5);
        let mut inv = planner.initial_inventory()[0];
        for p in &rep.periods {
            assert_eq!(p.inventory_start[0], inv);
            let next = inv + p.factors[0] * p.orders[0] - p.shipped[0];
            assert!((next - p.inventory[0]).abs() < 1e-6);
            inv = p.inventory[0];
        }
        let phi: f64 = rep.periods.iter().map(|p| p.objective).sum();
        assert!((phi - rep.phi).abs() < 1e-6);
    }

    #[test]
    fn doubling_n_averages_half_batches() {
        let inst = crate::fixtures::minimal();
        let design = run_gfa(&inst, &GfaConfig::default()).unwrap().design;
        let planner = Planner::new(&inst, &design, PlanConfig::default()).unwrap();
        let full = estimate_objectives(&planner, 0.01, 8, 3).unwrap();
        let first: f64 = full.runs[..4].iter().map(|r| r.total_cost()).sum::<f64>() / 4.0;
        let second: f64 = full.runs[4..].iter().map(|r| r.total_cost()).sum::<f64>() / 4.0;
        assert!((full.z2 - (first + second) / 2.0).abs() < 1e-9 * full.z2.abs());
        let half = estimate_objectives(&planner, 0.01, 4, 3).unwrap();
        assert_eq!(half.runs[..], full.runs[..4]);
    }

    #[test]
    fn zero_replications_rejected() {
        let inst = crate::fixtures::minimal();
        let design = run_gfa(&inst, &GfaConfig::default()).unwrap().design;
        let planner = Planner::new(&inst, &design, PlanConfig::default()).unwrap();
        assert!(matches!(estimate_objectives(&planner, 0.01, 0, 3), Err(PlanError::NoReplications)));
    }

    #[test]
    fn plan_summary_round_trips() {
        let inst = crate::fixtures::minimal();
        let design = run_gfa(&inst, &GfaConfig::default()).unwrap().design;
        let planner = Planner::new(&inst, &design, PlanConfig::default()).unwrap();
        let est = estimate_objectives(&planner, 0.01, 3, 3).unwrap();
        let plan = PlanSummary::from_estimate(&planner, &est);
        assert_eq!(plan.mean_orders.len(), 5);
        assert_eq!(plan.customer_dc, vec!["D1".to_string()]);
        assert_eq!(PlanSummary::from_json(&plan.to_json()).unwrap(), plan);
    }
}
