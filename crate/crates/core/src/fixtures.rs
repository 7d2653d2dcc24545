//! Instances bundled with the crate.

use crate::model::NetworkInstance;

/// Beef distribution case: 3 warehouses, 4 regions, 8 DCs, 40 customers.
/// Region and nutrient data are taken from the published case; customer
/// coordinates are synthetic and frozen.
pub const QATAR_BEEF: &str = include_str!("../fixtures/qatar_beef.json");

/// One warehouse, one region, one DC, one customer, one nutrient.
pub const MINIMAL: &str = include_str!("../fixtures/minimal.json");

pub fn qatar_beef() -> NetworkInstance {
    NetworkInstance::from_json(QATAR_BEEF).expect("bundled instance is valid")
}

pub fn minimal() -> NetworkInstance {
    NetworkInstance::from_json(MINIMAL).expect("bundled instance is valid")
}
