//! Re-checks stored period decisions against the model's constraints using
//! only the instance, the design and the recorded numbers.

use serde::Serialize;

use super::estimate::ReplicationResult;
use super::period::PeriodDecision;
use super::BalanceForm;
use crate::accessibility::{accessible_nutrition, plus, requirements};
use crate::model::{derive_mean_local_demand, NetworkDesign, NetworkInstance};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub period: usize,
    pub constraint: &'static str,
    /// DC, customer, warehouse or region index depending on `constraint`.
    pub index: usize,
    pub residual: f64,
}

/// Returns every constraint of `decision` violated by more than `tol`:
/// inventory balance, inventory bounds, warehouse capacity, demand split,
/// nonnegativity, and the plus-term auxiliaries.
pub fn audit_period(
    instance: &NetworkInstance,
    design: &NetworkDesign,
    form: BalanceForm,
    decision: &PeriodDecision,
    tol: f64,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |constraint: &'static str, index: usize, residual: f64| {
        if !(residual.abs() <= tol) {
            out.push(Violation {
                period: decision.period,
                constraint,
                index,
                residual,
            });
        }
    };
    let dcs: Vec<_> = instance.dcs().map(|(_, d)| d).collect();
    let floor = derive_mean_local_demand(design, instance);
    let v = instance.safety_stock_fraction;

    for h in 0..dcs.len() {
        let mut outflow = 0.0;
        for (l, &owner) in design.customer_dc.iter().enumerate() {
            if owner == h {
                outflow += match form {
                    BalanceForm::Delivered => decision.shipped[l],
                    BalanceForm::Demand => decision.demand[l],
                };
            }
        }
        let expected = decision.inventory_start[h] + decision.factors[h] * decision.orders[h] - outflow;
        check("balance", h, decision.inventory[h] - expected);
        let inv = decision.inventory[h];
        check("inventory_lower", h, (v * floor[h] - inv).max(0.0));
        check("inventory_upper", h, (inv - dcs[h].capacity).max(0.0));
        check("order_nonnegative", h, decision.orders[h].min(0.0));
    }

    for (w, wh) in instance.warehouses.iter().enumerate() {
        let sent: f64 = (0..dcs.len()).filter(|&h| design.dc_warehouse[h] == w).map(|h| decision.orders[h]).sum();
        check("warehouse_capacity", w, (sent - wh.capacity).max(0.0));
    }

    for l in 0..design.customer_dc.len() {
        check("demand_split", l, decision.shipped[l] + decision.unfulfilled[l] - decision.demand[l]);
        check("shipped_nonnegative", l, decision.shipped[l].min(0.0));
        check("unfulfilled_nonnegative", l, decision.unfulfilled[l].min(0.0));
    }

    let dc_region = instance.dc_region();
    for aux in &decision.quality_aux {
        let stock: f64 = (0..dcs.len()).filter(|&h| dc_region[h] == aux.region).map(|h| decision.inventory[h]).sum();
        let n = accessible_nutrition(stock, &instance.nutrients)[aux.nutrient];
        let req = requirements(instance, aux.region)[aux.nutrient];
        check("quality_aux", aux.region, aux.value - plus(n - req));
    }
    out
}

pub fn audit_replication(
    instance: &NetworkInstance,
    design: &NetworkDesign,
    form: BalanceForm,
    replication: &ReplicationResult,
    tol: f64,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut inv = None::<&Vec<f64>>;
    for p in &replication.periods {
        if let Some(prev) = inv {
            for (h, (a, b)) in prev.iter().zip(&p.inventory_start).enumerate() {
                if a != b {
                    out.push(Violation {
                        period: p.period,
                        constraint: "inventory_carryover",
                        index: h,
                        residual: b - a,
                    });
                }
            }
        }
        out.extend(audit_period(instance, design, form, p, tol));
        inv = Some(&p.inventory);
    }
    let phi: f64 = replication.periods.iter().map(|p| p.objective).sum();
    if !((phi - replication.phi).abs() <= tol) {
        out.push(Violation {
            period: replication.periods.len(),
            constraint: "objective_sum",
            index: replication.index,
            residual: phi - replication.phi,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfa::{run_gfa, GfaConfig};
    use crate::stochastic::{run_replication, PlanConfig, Planner};

    #[test]
    fn detects_tampering() {
        let inst = crate::fixtures::minimal();
        let design = run_gfa(&inst, &GfaConfig::default()).unwrap().design;
        let planner = Planner::new(&inst, &design, PlanConfig::default()).unwrap();
        let rep = run_replication(&planner, 0.01, 0, 4).unwrap();
        assert!(audit_replication(&inst, &design, BalanceForm::Delivered, &rep, 1e-6).is_empty());

        let mut bad = rep.clone();
        bad.periods[2].shipped[0] += 1.0;
        let found: Vec<&str> = audit_replication(&inst, &design, BalanceForm::Delivered, &bad, 1e-6)
            .iter()
            .map(|v| v.constraint)
            .collect();
        assert!(found.contains(&"balance"));
        assert!(found.contains(&"demand_split"));

        let mut bad = rep.clone();
        bad.periods[1].inventory[0] = 900.0;
        let found: Vec<&str> = audit_period(&inst, &design, BalanceForm::Delivered, &bad.periods[1], 1e-6)
            .iter()
            .map(|v| v.constraint)
            .collect();
        assert!(found.contains(&"inventory_upper"));

        let mut bad = rep;
        bad.periods[0].orders[0] = 2000.0;
        let found: Vec<&str> = audit_period(&inst, &design, BalanceForm::Delivered, &bad.periods[0], 1e-6)
            .iter()
            .map(|v| v.constraint)
            .collect();
        assert!(found.contains(&"warehouse_capacity"));
    }
}
