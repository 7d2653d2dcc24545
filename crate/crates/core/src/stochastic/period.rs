use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use chainforge_milp::{solve_milp_with, LinearModel, Relation, Sense, Status, VarId};

use super::{AffordabilityAggregation, BalanceForm, InitialInventory, PlanConfig, PlanError};
use crate::accessibility::{self, AccessibilitySnapshot, Scales, Shipment};
use crate::model::{derive_mean_local_demand, NetworkDesign, NetworkInstance};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub inventory: f64,
    pub unfulfilled: f64,
    pub order: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.inventory + self.unfulfilled + self.order
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            inventory: self.inventory * k,
            unfulfilled: self.unfulfilled * k,
            order: self.order * k,
        }
    }
}

impl Add for CostBreakdown {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            inventory: self.inventory + o.inventory,
            unfulfilled: self.unfulfilled + o.unfulfilled,
            order: self.order + o.order,
        }
    }
}

impl AddAssign for CostBreakdown {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// State and realized uncertainty entering one period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodInput {
    pub period: usize,
    /// Inv_{t−1} per DC, kg.
    pub inventory: Vec<f64>,
    /// Realized demand per customer, kg.
    pub demand: Vec<f64>,
    /// Delivered fraction per DC from its linked warehouse.
    pub factors: Vec<f64>,
}

/// Value of the plus-term auxiliary `(n_ij − req_ij)^+` at the solution, nutrient units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityAux {
    pub region: usize,
    pub nutrient: usize,
    pub value: f64,
}

/// Solved plan of one period. Flows are stored per active link: `orders[h]`
/// comes from DC h's warehouse, `shipped[l]` and `unfulfilled[l]` belong to
/// customer l's DC.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodDecision {
    pub period: usize,
    pub epsilon: f64,
    pub inventory_start: Vec<f64>,
    pub demand: Vec<f64>,
    pub factors: Vec<f64>,
    pub orders: Vec<f64>,
    pub shipped: Vec<f64>,
    pub unfulfilled: Vec<f64>,
    pub inventory: Vec<f64>,
    pub quality_aux: Vec<QualityAux>,
    pub accessibility: Vec<AccessibilitySnapshot>,
    pub costs: CostBreakdown,
    /// Raw C^T summed over regions.
    pub transport_effort: f64,
    /// φ_t = Σ_i (−w^T·I^T + w^Q·I^Q) − ε·cost, recomputed from the flows.
    pub objective: f64,
    pub solver_objective: f64,
    pub nodes: usize,
}

impl PeriodDecision {
    /// Quantity arriving at each DC: factor × ordered.
    pub fn received(&self) -> Vec<f64> {
        self.orders.iter().zip(&self.factors).map(|(x, f)| x * f).collect()
    }

    /// Σ_i (−w^T·I^T + w^Q·I^Q), the accessibility part of φ_t.
    pub fn accessibility_value(&self, instance: &NetworkInstance) -> f64 {
        self.accessibility
            .iter()
            .map(|s| {
                let w = instance.regions[s.region].accessibility_weights;
                -w.transportation * s.normalized[1] + w.quality * s.normalized[2]
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy)]
enum QualityTerm {
    /// Auxiliary `a'` in kg; the nutrient-unit value is `beta · a'`.
    Var { a: VarId, beta: f64 },
    /// The requirement can never be exceeded, so the term is identically 0.
    Zero,
}

/// A built period model and the handles needed to read its solution.
#[derive(Debug, Clone)]
pub struct PeriodModel {
    pub model: LinearModel,
    pub orders: Vec<VarId>,
    pub inventory: Vec<VarId>,
    pub shipped: Vec<VarId>,
    pub unfulfilled: Vec<VarId>,
    quality: Vec<(usize, usize, QualityTerm)>,
}

impl PeriodModel {
    pub fn quality_aux(&self, values: &[f64]) -> Vec<QualityAux> {
        self.quality
            .iter()
            .map(|&(region, nutrient, term)| QualityAux {
                region,
                nutrient,
                value: match term {
                    QualityTerm::Var { a, beta } => beta * values[a.index()],
                    QualityTerm::Zero => 0.0,
                },
            })
            .collect()
    }
}

/// Instance data flattened for repeated period solves.
#[derive(Debug, Clone)]
pub struct Planner<'a> {
    instance: &'a NetworkInstance,
    design: &'a NetworkDesign,
    config: PlanConfig,
    scales: Scales,
    dc_ids: Vec<String>,
    customer_ids: Vec<String>,
    customer_region: Vec<usize>,
    dcs_of_region: Vec<Vec<usize>>,
    customers_of_dc: Vec<Vec<usize>>,
    mean_local_demand: Vec<f64>,
    lower: Vec<f64>,
    capacity: Vec<f64>,
    holding: Vec<f64>,
    order_cost: Vec<f64>,
    penalty: Vec<f64>,
    ship_weight: Vec<f64>,
    requirements: Vec<Vec<f64>>,
    initial: Vec<f64>,
}

impl<'a> Planner<'a> {
    pub fn new(instance: &'a NetworkInstance, design: &'a NetworkDesign, config: PlanConfig) -> Result<Self, PlanError> {
        design.validate(instance)?;
        let scales = accessibility::resolve_scales(instance, design)?;
        let dcs: Vec<_> = instance.dcs().map(|(_, d)| d).collect();
        let customers: Vec<_> = instance.customers().map(|(_, c)| c).collect();
        let dc_region = instance.dc_region();
        let customer_region = instance.customer_region();
        let mean_local_demand = derive_mean_local_demand(design, instance);
        let v = instance.safety_stock_fraction;
        let lower: Vec<f64> = mean_local_demand.iter().map(|s| v * s).collect();
        let capacity: Vec<f64> = dcs.iter().map(|d| d.capacity).collect();
        for h in 0..dcs.len() {
            if lower[h] > capacity[h] {
                return Err(PlanError::InfeasibleBounds {
                    dc: dcs[h].id.clone(),
                    lower: lower[h],
                    capacity: capacity[h],
                });
            }
        }
        let initial = match &config.initial_inventory {
            InitialInventory::SafetyStock => lower.clone(),
            InitialInventory::Explicit(inv) => {
                if inv.len() != dcs.len() {
                    return Err(PlanError::InitialInventory(format!(
                        "{} values given for {} DCs",
                        inv.len(),
                        dcs.len()
                    )));
                }
                for (h, &q) in inv.iter().enumerate() {
                    if !(q >= 0.0 && q <= capacity[h]) {
                        return Err(PlanError::InitialInventory(format!(
                            "DC {}: {q} kg is outside [0, {}]",
                            dcs[h].id, capacity[h]
                        )));
                    }
                }
                inv.clone()
            }
        };
        let mut dcs_of_region = vec![Vec::new(); instance.regions.len()];
        for (h, &r) in dc_region.iter().enumerate() {
            dcs_of_region[r].push(h);
        }
        let customers_of_dc = (0..dcs.len()).map(|h| design.customers_of(h)).collect();
        let order_cost = (0..dcs.len())
            .map(|h| instance.warehouses[design.dc_warehouse[h]].order_unit_cost.for_dc(&dcs[h].id))
            .collect();
        let ship_weight = (0..customers.len())
            .map(|l| {
                let h = design.customer_dc[l];
                instance.path_factor(&dcs[h].id, &customers[l].id) * design.distances[h][l]
            })
            .collect();
        Ok(Self {
            instance,
            design,
            scales,
            dc_ids: dcs.iter().map(|d| d.id.clone()).collect(),
            customer_ids: customers.iter().map(|c| c.id.clone()).collect(),
            holding: dcs.iter().map(|d| d.inventory_unit_cost).collect(),
            penalty: customer_region
                .iter()
                .map(|&r| instance.regions[r].unfulfilled_unit_cost)
                .collect(),
            requirements: (0..instance.regions.len())
                .map(|r| accessibility::requirements(instance, r))
                .collect(),
            customer_region,
            dcs_of_region,
            customers_of_dc,
            mean_local_demand,
            lower,
            capacity,
            order_cost,
            ship_weight,
            initial,
            config,
        })
    }

    pub fn instance(&self) -> &'a NetworkInstance {
        self.instance
    }

    pub fn design(&self) -> &'a NetworkDesign {
        self.design
    }

    pub fn config(&self) -> &PlanConfig {
        &self.config
    }

    pub fn scales(&self) -> Scales {
        self.scales
    }

    pub fn mean_local_demand(&self) -> &[f64] {
        &self.mean_local_demand
    }

    /// v·S_h per DC.
    pub fn safety_stock(&self) -> &[f64] {
        &self.lower
    }

    pub fn initial_inventory(&self) -> &[f64] {
        &self.initial
    }

    /// First-stage term Σ_i w^A·I^A, repeated T times under
    /// [`AffordabilityAggregation::PerPeriod`].
    pub fn affordability_term(&self) -> Result<f64, PlanError> {
        let mut total = 0.0;
        for region in &self.instance.regions {
            let raw = accessibility::affordability(region)?;
            total += region.accessibility_weights.affordability * accessibility::normalize(raw, self.scales.affordability)?;
        }
        Ok(match self.config.affordability {
            AffordabilityAggregation::Once => total,
            AffordabilityAggregation::PerPeriod => total * self.instance.horizon as f64,
        })
    }

    /// Assembles the period MILP (maximization).
    ///
    /// The plus term `(β·ΣInv − req)^+` of each (region, nutrient) is modeled
    /// in kg by `a' = a/β` with one binary `b`:
    /// `a' ≤ M1·b` and `a' ≤ ΣInv − R + M2·(1 − b)`, where `R = req/β`,
    /// `M1 = ΣCap − R` and `M2 = R − Σv·S` are the tightest valid constants.
    /// When `M1 ≤ 0` the term is identically zero; when `M2 ≤ 0` the
    /// requirement is always met and no binary is needed.
    pub fn build_period_model(&self, input: &PeriodInput, epsilon: f64) -> PeriodModel {
        let inst = self.instance;
        let design = self.design;
        let nh = self.dc_ids.len();
        let nl = self.customer_ids.len();
        let mut m = LinearModel::new(format!("period_{}", input.period));
        m.set_sense(Sense::Maximize);

        let orders: Vec<VarId> = (0..nh)
            .map(|h| {
                let w = design.dc_warehouse[h];
                let x = m.add_continuous(
                    format!("x[{},{}]", inst.warehouses[w].id, self.dc_ids[h]),
                    0.0,
                    inst.warehouses[w].capacity,
                );
                m.set_objective(x, -epsilon * self.order_cost[h]);
                x
            })
            .collect();
        let inventory: Vec<VarId> = (0..nh)
            .map(|h| {
                let v = m.add_continuous(format!("inv[{}]", self.dc_ids[h]), self.lower[h], self.capacity[h]);
                m.set_objective(v, -epsilon * self.holding[h]);
                v
            })
            .collect();
        let mut shipped = Vec::with_capacity(nl);
        let mut unfulfilled = Vec::with_capacity(nl);
        for l in 0..nl {
            let d = input.demand[l];
            let r = self.customer_region[l];
            let wt = inst.regions[r].accessibility_weights.transportation;
            let c = m.add_continuous(format!("c[{}]", self.customer_ids[l]), 0.0, d);
            m.set_objective(c, -wt * self.ship_weight[l] / self.scales.transportation);
            let g = m.add_continuous(format!("g[{}]", self.customer_ids[l]), 0.0, d);
            m.set_objective(g, -epsilon * self.penalty[l]);
            m.add_constraint(format!("demand[{}]", self.customer_ids[l]), [(c, 1.0), (g, 1.0)], Relation::Eq, d);
            shipped.push(c);
            unfulfilled.push(g);
        }

        for h in 0..nh {
            let f = input.factors[h];
            let customers = &self.customers_of_dc[h];
            match self.config.balance {
                BalanceForm::Delivered => {
                    let terms = [(inventory[h], 1.0), (orders[h], -f)]
                        .into_iter()
                        .chain(customers.iter().map(|&l| (shipped[l], 1.0)));
                    m.add_constraint(format!("balance[{}]", self.dc_ids[h]), terms, Relation::Eq, input.inventory[h]);
                }
                BalanceForm::Demand => {
                    let demand: f64 = customers.iter().map(|&l| input.demand[l]).sum();
                    m.add_constraint(
                        format!("balance[{}]", self.dc_ids[h]),
                        [(inventory[h], 1.0), (orders[h], -f)],
                        Relation::Eq,
                        input.inventory[h] - demand,
                    );
                    // Shipments still have to come out of available stock.
                    let terms = std::iter::once((orders[h], -f)).chain(customers.iter().map(|&l| (shipped[l], 1.0)));
                    m.add_constraint(format!("available[{}]", self.dc_ids[h]), terms, Relation::Le, input.inventory[h]);
                }
            }
        }

        for (w, wh) in inst.warehouses.iter().enumerate() {
            let terms: Vec<(VarId, f64)> = (0..nh).filter(|&h| design.dc_warehouse[h] == w).map(|h| (orders[h], 1.0)).collect();
            if !terms.is_empty() {
                m.add_constraint(format!("warehouse[{}]", wh.id), terms, Relation::Le, wh.capacity);
            }
        }

        let mut quality = Vec::new();
        for (i, region) in inst.regions.iter().enumerate() {
            let wq = region.accessibility_weights.quality;
            let cap: f64 = self.dcs_of_region[i].iter().map(|&h| self.capacity[h]).sum();
            let low: f64 = self.dcs_of_region[i].iter().map(|&h| self.lower[h]).sum();
            let mut switches: Vec<(f64, usize, VarId)> = Vec::new();
            for (j, nutrient) in inst.nutrients.iter().enumerate() {
                let beta = nutrient.per_kg_content;
                let coef = wq * nutrient.weight * beta / self.scales.quality;
                if coef == 0.0 || beta == 0.0 {
                    continue;
                }
                let threshold = self.requirements[i][j] / beta;
                let m1 = cap - threshold;
                let m2 = threshold - low;
                if m1 <= 0.0 {
                    quality.push((i, j, QualityTerm::Zero));
                    continue;
                }
                let tag = format!("{},{}", region.id, nutrient.id);
                let a = m.add_continuous(format!("a[{tag}]"), 0.0, m1);
                m.set_objective(a, coef);
                let stock = self.dcs_of_region[i].iter().map(|&h| (inventory[h], -1.0));
                if m2 <= 0.0 {
                    m.add_constraint(format!("surplus[{tag}]"), std::iter::once((a, 1.0)).chain(stock), Relation::Le, -threshold);
                } else {
                    let b = m.add_binary(format!("b[{tag}]"));
                    switches.push((threshold, j, b));
                    m.add_constraint(format!("active[{tag}]"), [(a, 1.0), (b, -m1)], Relation::Le, 0.0);
                    m.add_constraint(
                        format!("surplus[{tag}]"),
                        [(a, 1.0), (b, m2)].into_iter().chain(stock),
                        Relation::Le,
                        m2 - threshold,
                    );
                }
                quality.push((i, j, QualityTerm::Var { a, beta }));
            }
            // Exceeding a threshold implies exceeding every lower one, so
            // switches may be ordered by threshold without losing an optimum.
            switches.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
            for pair in switches.windows(2) {
                let (lo, hi) = (pair[0], pair[1]);
                let tag = format!("{},{}>{}", region.id, inst.nutrients[hi.1].id, inst.nutrients[lo.1].id);
                m.add_constraint(format!("order[{tag}]"), [(hi.2, 1.0), (lo.2, -1.0)], Relation::Le, 0.0);
            }
        }

        PeriodModel {
            model: m,
            orders,
            inventory,
            shipped,
            unfulfilled,
            quality,
        }
    }

    /// Builds and solves one period. `seed` only labels diagnostics.
    pub fn solve_period(&self, input: &PeriodInput, epsilon: f64, seed: u64) -> Result<PeriodDecision, PlanError> {
        let pm = self.build_period_model(input, epsilon);
        let res = solve_milp_with(&pm.model, &self.config.milp).map_err(|source| PlanError::Solver {
            seed,
            period: input.period,
            source,
        })?;
        let status = match res.status {
            Status::Optimal | Status::NodeLimit => None,
            Status::Infeasible => Some("infeasible"),
            Status::Unbounded => Some("unbounded"),
        };
        if let Some(status) = status {
            return Err(PlanError::Period {
                seed,
                period: input.period,
                status,
            });
        }
        let pick = |vars: &[VarId]| vars.iter().map(|&v| res.value(v)).collect::<Vec<f64>>();
        let mut decision = self.evaluate(
            input,
            epsilon,
            pick(&pm.orders),
            pick(&pm.shipped),
            pick(&pm.unfulfilled),
            pick(&pm.inventory),
        )?;
        decision.quality_aux = pm.quality_aux(&res.values);
        decision.solver_objective = res.objective;
        decision.nodes = res.nodes;
        Ok(decision)
    }

    /// Scores a set of flows: accessibility snapshots, costs and φ_t.
    pub fn evaluate(
        &self,
        input: &PeriodInput,
        epsilon: f64,
        orders: Vec<f64>,
        shipped: Vec<f64>,
        unfulfilled: Vec<f64>,
        inventory: Vec<f64>,
    ) -> Result<PeriodDecision, PlanError> {
        let inst = self.instance;
        let mut snapshots = Vec::with_capacity(inst.regions.len());
        let mut effort = 0.0;
        for i in 0..inst.regions.len() {
            let stock: f64 = self.dcs_of_region[i].iter().map(|&h| inventory[h]).sum();
            let shipments: Vec<Shipment> = (0..shipped.len())
                .filter(|&l| self.customer_region[l] == i)
                .map(|l| Shipment {
                    dc: self.design.customer_dc[l],
                    customer: l,
                    kg: shipped[l],
                })
                .collect();
            let snap = accessibility::snapshot(inst, self.design, &self.scales, i, input.period, stock, &shipments)?;
            effort += snap.raw[1];
            snapshots.push(snap);
        }
        let costs = CostBreakdown {
            inventory: inventory.iter().zip(&self.holding).map(|(q, p)| q * p).sum(),
            unfulfilled: unfulfilled.iter().zip(&self.penalty).map(|(q, p)| q * p).sum(),
            order: orders.iter().zip(&self.order_cost).map(|(q, p)| q * p).sum(),
        };
        let mut decision = PeriodDecision {
            period: input.period,
            epsilon,
            inventory_start: input.inventory.clone(),
            demand: input.demand.clone(),
            factors: input.factors.clone(),
            orders,
            shipped,
            unfulfilled,
            inventory,
            quality_aux: Vec::new(),
            accessibility: snapshots,
            costs,
            transport_effort: effort,
            objective: 0.0,
            solver_objective: f64::NAN,
            nodes: 0,
        };
        decision.objective = decision.accessibility_value(inst) - epsilon * costs.total();
        Ok(decision)
    }
}
