//! Discrete-event replay of a plan under timed, all-or-nothing customer
//! orders and an (S, s) replenishment policy at every DC.
//!
//! Run `r` draws its demands and supply factors from the same scenario as
//! optimizer replication `r` when both use the same master seed; order times
//! come from a separate stream.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{NetworkDesign, NetworkInstance};
use crate::report::csv_number;
use crate::stochastic::{mix_seed, sample_scenario, standard_error, PlanSummary};

/// Stored quantities are integers of this many per kg, so that inventory
/// bookkeeping is exact.
pub const UNITS_PER_KG: f64 = 1e6;

const TIMING_STREAM: u64 = 0x0DE5_71AE;

fn to_units(kg: f64) -> i64 {
    (kg * UNITS_PER_KG).round() as i64
}

fn to_kg(units: i64) -> f64 {
    units as f64 / UNITS_PER_KG
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BacklogMode {
    /// Unfillable orders are lost immediately.
    Drop,
    /// Unfillable orders queue at their DC until stock arrives; whatever is
    /// still queued at the horizon counts as unfulfilled.
    #[default]
    Wait,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub horizon: usize,
    /// Orders per customer per period; the period's demand is split evenly.
    pub orders_per_period: usize,
    /// Order-up-to level S per DC; defaults to capacity.
    pub order_up_to: Option<Vec<f64>>,
    /// Periods between placing and receiving a replenishment.
    pub lead_time: usize,
    pub backlog: BacklogMode,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(instance: &NetworkInstance, seed: u64) -> Self {
        Self {
            horizon: instance.horizon,
            orders_per_period: 1,
            order_up_to: None,
            lead_time: 0,
            backlog: BacklogMode::default(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("solution does not match the design: {0}")]
    Config(String),
}

/// Fraction of ordered volume that was delivered in full on arrival; 1 when
/// nothing was ordered.
pub fn service_level(successful: f64, total: f64) -> f64 {
    debug_assert!(total >= successful && successful >= 0.0);
    if total == 0.0 {
        1.0
    } else {
        (successful / total).clamp(0.0, 1.0)
    }
}

/// Per-DC stock ledger in integer units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DcLedger {
    pub initial: i64,
    pub received: i64,
    pub shipped: i64,
    pub closing: i64,
}

impl DcLedger {
    pub fn balanced(&self) -> bool {
        self.closing == self.initial + self.received - self.shipped
    }
}

/// A shipment in the event log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fulfillment {
    pub time: f64,
    pub dc: usize,
    pub customer: usize,
    pub units: i64,
    pub on_hand_before: i64,
    /// Shipped from the backlog rather than on arrival.
    pub late: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub run: usize,
    pub inventory_cost: f64,
    pub unfulfilled_cost: f64,
    pub order_cost: f64,
    pub total_cost: f64,
    pub service_level: Vec<f64>,
    pub overall_service_level: f64,
    pub orders_placed: usize,
    pub orders_successful: usize,
    pub orders_unsuccessful: usize,
    pub orders_dropped: usize,
    pub orders_served_late: usize,
    pub orders_unmet: usize,
    pub dcs: Vec<DcLedger>,
    pub fulfillments: Vec<Fulfillment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Review { period: usize },
    Order { customer: usize, units: i64 },
    End,
}

impl Kind {
    fn rank(&self) -> u8 {
        match self {
            Kind::Review { .. } => 0,
            Kind::Order { .. } => 1,
            Kind::End => 2,
        }
    }
}

#[derive(Debug, Clone)]
struct Event<'a> {
    time: f64,
    kind: Kind,
    customer_id: &'a str,
    seq: u64,
}

impl Event<'_> {
    fn key(&self) -> (f64, u8, &str, u64) {
        (self.time, self.kind.rank(), self.customer_id, self.seq)
    }
}

impl PartialEq for Event<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event<'_> {}
impl PartialOrd for Event<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event<'_> {
    /// (time, kind, customer id, sequence): reviews precede orders at the same instant.
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(b.2))
            .then(a.3.cmp(&b.3))
    }
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    customer: usize,
    units: i64,
}

/// Checks that `plan` was produced for this instance and design.
pub fn check_plan(instance: &NetworkInstance, design: &NetworkDesign, plan: &PlanSummary) -> Result<(), SimError> {
    let dc_ids: Vec<&str> = instance.dcs().map(|(_, d)| d.id.as_str()).collect();
    let cust_ids: Vec<&str> = instance.customers().map(|(_, c)| c.id.as_str()).collect();
    if plan.dc_ids != dc_ids || plan.customer_ids != cust_ids {
        return Err(SimError::Config("node identifiers differ".into()));
    }
    for (h, w) in plan.dc_warehouse.iter().enumerate() {
        if instance.warehouses[design.dc_warehouse[h]].id != *w {
            return Err(SimError::Config(format!("DC {} is supplied by {w} in the solution", dc_ids[h])));
        }
    }
    for (l, h) in plan.customer_dc.iter().enumerate() {
        if dc_ids[design.customer_dc[l]] != h {
            return Err(SimError::Config(format!("customer {} is supplied by {h} in the solution", cust_ids[l])));
        }
    }
    if plan.initial_inventory.len() != dc_ids.len() || plan.safety_stock.len() != dc_ids.len() {
        return Err(SimError::Config("per-DC vectors have the wrong length".into()));
    }
    Ok(())
}

/// Simulates run `run` of a plan.
pub fn simulate(
    instance: &NetworkInstance,
    design: &NetworkDesign,
    plan: &PlanSummary,
    config: &SimConfig,
    run: usize,
) -> Result<SimReport, SimError> {
    check_plan(instance, design, plan)?;
    let dcs: Vec<_> = instance.dcs().map(|(_, d)| d).collect();
    let customers: Vec<_> = instance.customers().map(|(_, c)| c).collect();
    let nh = dcs.len();
    let customer_region = instance.customer_region();
    if config.horizon == 0 || config.orders_per_period == 0 {
        return Err(SimError::Config("horizon and orders per period must be positive".into()));
    }
    let order_up_to = match &config.order_up_to {
        Some(s) if s.len() != nh => return Err(SimError::Config("order-up-to levels need one value per DC".into())),
        Some(s) => s.clone(),
        None => dcs.iter().map(|d| d.capacity).collect(),
    };
    for h in 0..nh {
        let (s, big_s) = (plan.safety_stock[h], order_up_to[h]);
        if !(s <= big_s * (1.0 + 1e-12) && big_s <= dcs[h].capacity) {
            return Err(SimError::Config(format!(
                "DC {}: need s ≤ S ≤ capacity, got s = {s}, S = {big_s}",
                dcs[h].id
            )));
        }
        if !(plan.initial_inventory[h] >= 0.0 && plan.initial_inventory[h] <= dcs[h].capacity) {
            return Err(SimError::Config(format!("DC {}: initial inventory out of range", dcs[h].id)));
        }
    }

    let mut horizon_instance = instance.clone();
    horizon_instance.horizon = config.horizon;
    let scenario = sample_scenario(&horizon_instance, mix_seed(config.seed, run as u64));
    let mut timing = ChaCha8Rng::seed_from_u64(mix_seed(config.seed ^ TIMING_STREAM, run as u64));

    let mut queue = BinaryHeap::new();
    let mut seq = 0u64;
    for t in 0..config.horizon {
        queue.push(Reverse(Event {
            time: t as f64,
            kind: Kind::Review { period: t },
            customer_id: "",
            seq,
        }));
        seq += 1;
        let k = config.orders_per_period;
        for (l, c) in customers.iter().enumerate() {
            let units = to_units(scenario.demands[t][l] / k as f64);
            for _ in 0..k {
                let time = t as f64 + timing.random::<f64>();
                queue.push(Reverse(Event {
                    time,
                    kind: Kind::Order { customer: l, units },
                    customer_id: c.id.as_str(),
                    seq,
                }));
                seq += 1;
            }
        }
    }
    queue.push(Reverse(Event {
        time: config.horizon as f64,
        kind: Kind::End,
        customer_id: "",
        seq,
    }));

    let holding: Vec<f64> = dcs.iter().map(|d| d.inventory_unit_cost).collect();
    let order_cost: Vec<f64> = (0..nh)
        .map(|h| instance.warehouses[design.dc_warehouse[h]].order_unit_cost.for_dc(&dcs[h].id))
        .collect();
    let penalty: Vec<f64> = customer_region
        .iter()
        .map(|&r| instance.regions[r].unfulfilled_unit_cost)
        .collect();
    let reorder_point: Vec<i64> = plan.safety_stock.iter().map(|&s| to_units(s)).collect();
    let target: Vec<i64> = order_up_to.iter().map(|&s| to_units(s)).collect();

    let mut on_hand: Vec<i64> = plan.initial_inventory.iter().map(|&q| to_units(q)).collect();
    let mut ledgers: Vec<DcLedger> = on_hand
        .iter()
        .map(|&q| DcLedger {
            initial: q,
            ..Default::default()
        })
        .collect();
    let mut pipeline: Vec<(usize, usize, i64)> = Vec::new();
    let mut backlog: Vec<VecDeque<Pending>> = vec![VecDeque::new(); nh];
    let nr = instance.regions.len();
    let mut placed_volume = vec![0i64; nr];
    let mut ok_volume = vec![0i64; nr];
    let mut report = SimReport {
        run,
        inventory_cost: 0.0,
        unfulfilled_cost: 0.0,
        order_cost: 0.0,
        total_cost: 0.0,
        service_level: Vec::new(),
        overall_service_level: 0.0,
        orders_placed: 0,
        orders_successful: 0,
        orders_unsuccessful: 0,
        orders_dropped: 0,
        orders_served_late: 0,
        orders_unmet: 0,
        dcs: Vec::new(),
        fulfillments: Vec::new(),
    };

    let holding_cost = |on_hand: &[i64]| -> f64 { on_hand.iter().zip(&holding).map(|(&q, p)| to_kg(q) * p).sum() };

    while let Some(Reverse(ev)) = queue.pop() {
        match ev.kind {
            Kind::Review { period } => {
                if period > 0 {
                    report.inventory_cost += holding_cost(&on_hand);
                }
                let mut remaining: Vec<f64> = instance.warehouses.iter().map(|w| w.capacity).collect();
                for h in 0..nh {
                    let incoming: i64 = pipeline.iter().filter(|p| p.1 == h).map(|p| p.2).sum();
                    let position = on_hand[h] + incoming;
                    if position > reorder_point[h] {
                        continue;
                    }
                    let w = design.dc_warehouse[h];
                    let qty = to_kg(target[h] - position).min(remaining[w]).max(0.0);
                    if qty == 0.0 {
                        continue;
                    }
                    remaining[w] -= qty;
                    report.order_cost += order_cost[h] * qty;
                    let arrives = to_units(scenario.supply_factors[period][w][h] * qty);
                    pipeline.push((period + config.lead_time, h, arrives));
                }
                pipeline.retain(|&(due, h, units)| {
                    if due == period {
                        on_hand[h] += units;
                        ledgers[h].received += units;
                        false
                    } else {
                        true
                    }
                });
                for h in 0..nh {
                    while let Some(&head) = backlog[h].front() {
                        if head.units > on_hand[h] {
                            break;
                        }
                        backlog[h].pop_front();
                        report.fulfillments.push(Fulfillment {
                            time: ev.time,
                            dc: h,
                            customer: head.customer,
                            units: head.units,
                            on_hand_before: on_hand[h],
                            late: true,
                        });
                        on_hand[h] -= head.units;
                        ledgers[h].shipped += head.units;
                        report.orders_served_late += 1;
                    }
                }
            }
            Kind::Order { customer, units } => {
                let h = design.customer_dc[customer];
                let r = customer_region[customer];
                report.orders_placed += 1;
                placed_volume[r] += units;
                if units <= on_hand[h] {
                    report.fulfillments.push(Fulfillment {
                        time: ev.time,
                        dc: h,
                        customer,
                        units,
                        on_hand_before: on_hand[h],
                        late: false,
                    });
                    on_hand[h] -= units;
                    ledgers[h].shipped += units;
                    report.orders_successful += 1;
                    ok_volume[r] += units;
                } else {
                    report.orders_unsuccessful += 1;
                    match config.backlog {
                        BacklogMode::Drop => {
                            report.orders_dropped += 1;
                            report.unfulfilled_cost += penalty[customer] * to_kg(units);
                        }
                        BacklogMode::Wait => backlog[h].push_back(Pending { customer, units }),
                    }
                }
            }
            Kind::End => {
                report.inventory_cost += holding_cost(&on_hand);
                for q in &backlog {
                    for p in q {
                        report.orders_unmet += 1;
                        report.unfulfilled_cost += penalty[p.customer] * to_kg(p.units);
                    }
                }
            }
        }
    }

    for (h, l) in ledgers.iter_mut().enumerate() {
        l.closing = on_hand[h];
    }
    report.dcs = ledgers;
    report.total_cost = report.inventory_cost + report.unfulfilled_cost + report.order_cost;
    report.service_level = (0..nr)
        .map(|r| service_level(ok_volume[r] as f64, placed_volume[r] as f64))
        .collect();
    report.overall_service_level = service_level(
        ok_volume.iter().sum::<i64>() as f64,
        placed_volume.iter().sum::<i64>() as f64,
    );
    Ok(report)
}

/// Mean and standard error over runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
}

impl Stat {
    pub fn of(samples: &[f64]) -> Self {
        Self {
            mean: samples.iter().sum::<f64>() / samples.len() as f64,
            se: standard_error(samples),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationSummary {
    pub epsilon: f64,
    pub runs: usize,
    pub inventory_cost: Stat,
    pub unfulfilled_cost: Stat,
    pub order_cost: Stat,
    pub total_cost: Stat,
    pub service_level: Vec<Stat>,
    pub overall_service_level: Stat,
    /// The optimizer's expected unfulfilled cost for the same solution.
    pub optimizer_unfulfilled_cost: Stat,
    pub reports: Vec<SimReport>,
}

/// Runs `runs` independent simulations (concurrently) and summarizes them.
pub fn validate(
    instance: &NetworkInstance,
    design: &NetworkDesign,
    plan: &PlanSummary,
    config: &SimConfig,
    runs: usize,
) -> Result<ValidationSummary, SimError> {
    if runs == 0 {
        return Err(SimError::Config("at least one run is required".into()));
    }
    let reports: Vec<SimReport> = (0..runs)
        .into_par_iter()
        .map(|r| simulate(instance, design, plan, config, r))
        .collect::<Result<_, _>>()?;
    let stat = |f: &dyn Fn(&SimReport) -> f64| Stat::of(&reports.iter().map(f).collect::<Vec<f64>>());
    Ok(ValidationSummary {
        epsilon: plan.epsilon,
        runs,
        inventory_cost: stat(&|r| r.inventory_cost),
        unfulfilled_cost: stat(&|r| r.unfulfilled_cost),
        order_cost: stat(&|r| r.order_cost),
        total_cost: stat(&|r| r.total_cost),
        service_level: (0..instance.regions.len())
            .map(|i| stat(&|r| r.service_level[i]))
            .collect(),
        overall_service_level: stat(&|r| r.overall_service_level),
        optimizer_unfulfilled_cost: Stat {
            mean: plan.expected_costs.unfulfilled,
            se: plan.expected_costs_se.unfulfilled,
        },
        reports,
    })
}

/// One row per validated solution: simulated costs and service levels
/// (mean and standard error), next to the optimizer's expected costs.
pub fn write_validation_csv<W: Write>(
    out: W,
    instance: &NetworkInstance,
    rows: &[(ValidationSummary, &PlanSummary)],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = vec!["epsilon".into(), "runs".into()];
    for name in ["inventory_cost", "unfulfilled_cost", "order_cost", "total_cost"] {
        header.push(name.into());
        header.push(format!("{name}_se"));
    }
    for r in &instance.regions {
        header.push(format!("service_level_{}", r.id));
        header.push(format!("service_level_{}_se", r.id));
    }
    header.extend(
        [
            "service_level_total",
            "service_level_total_se",
            "optimizer_inventory_cost",
            "optimizer_unfulfilled_cost",
            "optimizer_unfulfilled_cost_se",
            "optimizer_order_cost",
            "optimizer_total_cost",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for (s, plan) in rows {
        let mut row = vec![csv_number(s.epsilon), s.runs.to_string()];
        for st in [s.inventory_cost, s.unfulfilled_cost, s.order_cost, s.total_cost]
            .iter()
            .chain(&s.service_level)
            .chain(std::iter::once(&s.overall_service_level))
        {
            row.push(csv_number(st.mean));
            row.push(csv_number(st.se));
        }
        let e = plan.expected_costs;
        row.extend(
            [e.inventory, e.unfulfilled, plan.expected_costs_se.unfulfilled, e.order, e.total()].map(csv_number),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
