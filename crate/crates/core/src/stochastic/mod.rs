//! Phase II: per-period stochastic planning by Monte Carlo replication.
//!
//! Each replication samples a [`Scenario`], then solves one MILP per period,
//! threading DC inventory forward. [`estimate_objectives`] averages the
//! replications into the accessibility (Z1) and cost (Z2) estimates.

mod audit;
mod estimate;
mod period;
mod scenario;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use chainforge_milp::{MilpOptions, SolveError};

use crate::accessibility::AccessibilityError;
use crate::model::DesignError;

pub use audit::{audit_period, audit_replication, Violation};
pub use estimate::{estimate_objectives, run_replication, standard_error, EstimateResult, PlanSummary, ReplicationResult};
pub use period::{CostBreakdown, PeriodDecision, PeriodInput, PeriodModel, Planner, QualityAux};
pub use scenario::{sample_scenario, Scenario};

/// How the inventory balance treats customer demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BalanceForm {
    /// Inventory falls by what is actually shipped to customers.
    #[default]
    Delivered,
    /// Inventory falls by the full realized demand.
    Demand,
}

/// How often the affordability term enters Z1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AffordabilityAggregation {
    /// Σ_i w^A·I^A, once per estimate.
    #[default]
    Once,
    /// Σ_i Σ_t w^A·I^A, repeated for every period.
    PerPeriod,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialInventory {
    /// Start every DC at its safety stock v·S_h.
    #[default]
    SafetyStock,
    /// Explicit kg per DC, flat DC order.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Default)]
pub struct PlanConfig {
    pub balance: BalanceForm,
    pub affordability: AffordabilityAggregation,
    pub initial_inventory: InitialInventory,
    pub milp: MilpOptions,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("DC {dc}: safety stock {lower} kg exceeds capacity {capacity} kg")]
    InfeasibleBounds { dc: String, lower: f64, capacity: f64 },
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Accessibility(#[from] AccessibilityError),
    #[error("initial inventory: {0}")]
    InitialInventory(String),
    #[error("replication seed {seed}, period {period}: model is {status}")]
    Period { seed: u64, period: usize, status: &'static str },
    #[error("replication seed {seed}, period {period}: {source}")]
    Solver {
        seed: u64,
        period: usize,
        #[source]
        source: SolveError,
    },
    #[error("at least one replication is required")]
    NoReplications,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `master`: two SplitMix64 rounds, so nearby
/// masters and indices give unrelated seeds. Stable across platforms and releases.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index)
}
