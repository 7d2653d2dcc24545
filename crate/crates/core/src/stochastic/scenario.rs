use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::model::{DemandSpec, NetworkInstance, SupplyLossSpec};

/// One realization of the uncertain inputs over the whole horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    /// `demands[t][l]`, kg.
    pub demands: Vec<Vec<f64>>,
    /// `supply_factors[t][w][h]`: delivered fraction `1 − θ` of a shipment from
    /// warehouse `w` to DC `h`.
    pub supply_factors: Vec<Vec<Vec<f64>>>,
    pub seed: u64,
}

impl Scenario {
    /// Delivered fraction for each DC from its supplying warehouse in period `t`.
    pub fn linked_factors(&self, t: usize, dc_warehouse: &[usize]) -> Vec<f64> {
        dc_warehouse
            .iter()
            .enumerate()
            .map(|(h, &w)| self.supply_factors[t][w][h])
            .collect()
    }
}

pub(crate) fn draw_demand(rng: &mut impl Rng, spec: &DemandSpec) -> f64 {
    if spec.variance == 0.0 {
        return spec.mean;
    }
    let normal = Normal::new(spec.mean, spec.std_dev()).expect("validated demand spec");
    normal.sample(rng).max(0.0)
}

pub(crate) fn draw_factor(rng: &mut impl Rng, spec: &SupplyLossSpec) -> f64 {
    if spec.low == spec.high {
        return spec.low;
    }
    rng.random_range(spec.low..=spec.high)
}

/// Draws all demands (period by period, customers in flat order), then all
/// supply factors (period, warehouse, DC).
pub fn sample_scenario(instance: &NetworkInstance, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs = instance.customer_demands();
    let demands = (0..instance.horizon)
        .map(|_| specs.iter().map(|s| draw_demand(&mut rng, s)).collect())
        .collect();
    let nh = instance.num_dcs();
    let loss = instance.stochastic.supply_loss;
    let supply_factors = (0..instance.horizon)
        .map(|_| {
            (0..instance.warehouses.len())
                .map(|_| (0..nh).map(|_| draw_factor(&mut rng, &loss)).collect())
                .collect()
        })
        .collect();
    Scenario {
        demands,
        supply_factors,
        seed,
    }
}
