//! Design and evaluation of three-echelon food distribution networks:
//! warehouses supply distribution centers (DCs), DCs supply customers.
//!
//! Phase I ([`gfa`]) places DCs and fixes single-supplier linkages.
//! Phase II ([`stochastic`]) plans flows and inventories per period under
//! sampled demand and supply loss, trading food accessibility against cost.

pub mod accessibility;
pub mod fixtures;
pub mod gfa;
pub mod model;
pub mod stochastic;
pub mod pareto;
pub mod des;
pub mod report;
