//! Problem instances, network designs and the quantities derived from them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Planar coordinate in kilometres, serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

pub fn euclidean_distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed instance: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid {field}: {message}")]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// Unit order cost of a warehouse: one number, or a default with per-DC overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderCost {
    Uniform(f64),
    PerDc {
        default: f64,
        #[serde(default)]
        per_dc: BTreeMap<String, f64>,
    },
}

impl OrderCost {
    pub fn for_dc(&self, dc_id: &str) -> f64 {
        match self {
            OrderCost::Uniform(c) => *c,
            OrderCost::PerDc { default, per_dc } => per_dc.get(dc_id).copied().unwrap_or(*default),
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            OrderCost::Uniform(c) => vec![*c],
            OrderCost::PerDc { default, per_dc } => std::iter::once(*default).chain(per_dc.values().copied()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Warehouse {
    pub id: String,
    pub location: Point,
    pub capacity: f64,
    pub order_unit_cost: OrderCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionCenter {
    pub id: String,
    pub capacity: f64,
    pub inventory_unit_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Customer {
    pub id: String,
    pub location: Point,
    /// Overrides the instance-wide demand distribution for this customer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<DemandSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessibilityWeights {
    pub affordability: f64,
    pub transportation: f64,
    pub quality: f64,
}

impl Default for AccessibilityWeights {
    fn default() -> Self {
        Self {
            affordability: 1.0,
            transportation: 1.0,
            quality: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub id: String,
    pub local_food_cost: f64,
    pub average_income: f64,
    pub residential_areas: f64,
    pub unfulfilled_unit_cost: f64,
    #[serde(default)]
    pub accessibility_weights: AccessibilityWeights,
    /// Overrides the instance-wide persons per residential area.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persons_per_area: Option<f64>,
    pub dcs: Vec<DistributionCenter>,
    pub customers: Vec<Customer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NutrientSpec {
    pub id: String,
    pub weight: f64,
    pub min_requirement: f64,
    pub per_kg_content: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathWeight {
    pub dc: String,
    pub customer: String,
    pub factor: f64,
}

/// Normal demand distribution, truncated at zero when sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDemandSpec", into = "RawDemandSpec")]
pub struct DemandSpec {
    pub mean: f64,
    pub variance: f64,
}

impl DemandSpec {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDemandSpec {
    family: String,
    mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    std_dev: Option<f64>,
}

impl TryFrom<RawDemandSpec> for DemandSpec {
    type Error = String;

    fn try_from(raw: RawDemandSpec) -> Result<Self, String> {
        if raw.family != "normal" {
            return Err(format!("unsupported demand family {:?} (expected \"normal\")", raw.family));
        }
        let variance = match (raw.variance, raw.std_dev) {
            (Some(v), None) => v,
            (None, Some(s)) => s * s,
            (None, None) => return Err("demand needs `variance` or `std_dev`".into()),
            (Some(_), Some(_)) => return Err("give only one of `variance` and `std_dev`".into()),
        };
        Ok(Self { mean: raw.mean, variance })
    }
}

impl From<DemandSpec> for RawDemandSpec {
    fn from(d: DemandSpec) -> Self {
        Self {
            family: "normal".into(),
            mean: d.mean,
            variance: Some(d.variance),
            std_dev: None,
        }
    }
}

/// Uniform distribution of the delivered fraction `1 - θ` of a shipment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUniform", into = "RawUniform")]
pub struct SupplyLossSpec {
    pub low: f64,
    pub high: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUniform {
    family: String,
    low: f64,
    high: f64,
}

impl TryFrom<RawUniform> for SupplyLossSpec {
    type Error = String;

    fn try_from(raw: RawUniform) -> Result<Self, String> {
        if raw.family != "uniform" {
            return Err(format!("unsupported supply_loss family {:?} (expected \"uniform\")", raw.family));
        }
        Ok(Self {
            low: raw.low,
            high: raw.high,
        })
    }
}

impl From<SupplyLossSpec> for RawUniform {
    fn from(s: SupplyLossSpec) -> Self {
        Self {
            family: "uniform".into(),
            low: s.low,
            high: s.high,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticSpec {
    pub demand: DemandSpec,
    pub supply_loss: SupplyLossSpec,
}

/// User-supplied normalization scales; missing entries use computed defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizationScales {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affordability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transportation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<f64>,
}

fn default_persons_per_area() -> f64 {
    50_000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkInstance {
    pub warehouses: Vec<Warehouse>,
    pub regions: Vec<Region>,
    pub nutrients: Vec<NutrientSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path_weights: Vec<PathWeight>,
    pub stochastic: StochasticSpec,
    pub safety_stock_fraction: f64,
    pub horizon: usize,
    #[serde(default)]
    pub normalization_scales: NormalizationScales,
    #[serde(default = "default_persons_per_area")]
    pub persons_per_area: f64,
}

/// Reads and validates an instance file.
pub fn load_instance(path: impl AsRef<Path>) -> Result<NetworkInstance, LoadError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ParseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    NetworkInstance::from_json(&text)
}

/// Global position of a DC or customer: region index and the flat index used
/// by every per-node vector in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRef {
    pub region: usize,
    pub local: usize,
}

impl NetworkInstance {
    pub fn from_json(text: &str) -> Result<Self, LoadError> {
        let inst: NetworkInstance = serde_json::from_str(text).map_err(ParseError::from)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    /// DCs in flat order (region by region).
    pub fn dcs(&self) -> impl Iterator<Item = (NodeRef, &DistributionCenter)> {
        self.regions.iter().enumerate().flat_map(|(r, reg)| {
            reg.dcs
                .iter()
                .enumerate()
                .map(move |(k, dc)| (NodeRef { region: r, local: k }, dc))
        })
    }

    /// Customers in flat order (region by region).
    pub fn customers(&self) -> impl Iterator<Item = (NodeRef, &Customer)> {
        self.regions.iter().enumerate().flat_map(|(r, reg)| {
            reg.customers
                .iter()
                .enumerate()
                .map(move |(k, c)| (NodeRef { region: r, local: k }, c))
        })
    }

    pub fn num_dcs(&self) -> usize {
        self.regions.iter().map(|r| r.dcs.len()).sum()
    }

    pub fn num_customers(&self) -> usize {
        self.regions.iter().map(|r| r.customers.len()).sum()
    }

    pub fn dc_region(&self) -> Vec<usize> {
        self.dcs().map(|(n, _)| n.region).collect()
    }

    pub fn customer_region(&self) -> Vec<usize> {
        self.customers().map(|(n, _)| n.region).collect()
    }

    /// Demand distribution of each customer in flat order.
    pub fn customer_demands(&self) -> Vec<DemandSpec> {
        self.customers()
            .map(|(_, c)| c.demand.unwrap_or(self.stochastic.demand))
            .collect()
    }

    pub fn persons_per_area(&self, region: usize) -> f64 {
        self.regions[region].persons_per_area.unwrap_or(self.persons_per_area)
    }

    /// Population-scaled requirement `r_j · p_i · κ` of nutrient `j` in region `i`.
    pub fn nutrient_requirement(&self, region: usize, nutrient: usize) -> f64 {
        let reg = &self.regions[region];
        self.nutrients[nutrient].min_requirement * reg.residential_areas * self.persons_per_area(region)
    }

    /// Path weighing factor f_hl (default 1).
    pub fn path_factor(&self, dc_id: &str, customer_id: &str) -> f64 {
        self.path_weights
            .iter()
            .find(|p| p.dc == dc_id && p.customer == customer_id)
            .map_or(1.0, |p| p.factor)
    }

    pub fn dc_index(&self, id: &str) -> Option<usize> {
        self.dcs().position(|(_, d)| d.id == id)
    }

    pub fn customer_index(&self, id: &str) -> Option<usize> {
        self.customers().position(|(_, c)| c.id == id)
    }

    /// Copy of the instance with a different safety-stock fraction.
    pub fn with_safety_stock(&self, v: f64) -> Result<Self, ValidationError> {
        let mut out = self.clone();
        out.safety_stock_fraction = v;
        out.validate()?;
        Ok(out)
    }

    /// Copy of the instance with `counts[region_id]` DCs in the listed regions.
    /// Extra DCs copy the last listed DC of their region and are named
    /// `<region>-DC<k>`; surplus DCs are dropped from the end.
    pub fn with_dc_counts(&self, counts: &BTreeMap<String, usize>) -> Result<Self, ValidationError> {
        let mut out = self.clone();
        for (rid, &k) in counts {
            let region = out
                .regions
                .iter_mut()
                .find(|r| &r.id == rid)
                .ok_or_else(|| ValidationError::new("dc_counts", format!("unknown region {rid}")))?;
            if k == 0 {
                return Err(ValidationError::new("dc_counts", format!("region {rid} needs at least one DC")));
            }
            let template = region
                .dcs
                .last()
                .cloned()
                .ok_or_else(|| ValidationError::new("dc_counts", format!("region {rid} lists no DC to copy")))?;
            region.dcs.truncate(k);
            while region.dcs.len() < k {
                let mut dc = template.clone();
                dc.id = format!("{}-DC{}", region.id, region.dcs.len() + 1);
                region.dcs.push(dc);
            }
        }
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        fn err(field: impl Into<String>, message: impl Into<String>) -> ValidationError {
            ValidationError::new(field, message)
        }
        let mut ids = BTreeSet::new();
        let mut unique = |kind: &str, id: &str| {
            if id.is_empty() {
                return Err(err(kind, "empty identifier"));
            }
            if !ids.insert(id.to_string()) {
                return Err(err(kind, format!("duplicate identifier {id}")));
            }
            Ok(())
        };
        let finite_point = |field: String, p: Point| {
            if p.x.is_finite() && p.y.is_finite() {
                Ok(())
            } else {
                Err(err(field, "coordinates must be finite"))
            }
        };

        if self.warehouses.is_empty() {
            return Err(err("warehouses", "at least one warehouse is required"));
        }
        for w in &self.warehouses {
            unique("warehouses.id", &w.id)?;
            finite_point(format!("warehouses[{}].location", w.id), w.location)?;
            if !(w.capacity > 0.0 && w.capacity.is_finite()) {
                return Err(err(format!("warehouses[{}].capacity", w.id), "must be positive"));
            }
            if w.order_unit_cost.values().iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
                return Err(err(format!("warehouses[{}].order_unit_cost", w.id), "must be non-negative"));
            }
        }
        if self.regions.is_empty() {
            return Err(err("regions", "at least one region is required"));
        }
        if !(self.persons_per_area > 0.0 && self.persons_per_area.is_finite()) {
            return Err(err("persons_per_area", "must be positive"));
        }
        for r in &self.regions {
            unique("regions.id", &r.id)?;
            let f = |name: &str| format!("regions[{}].{name}", r.id);
            if !(r.local_food_cost >= 0.0 && r.local_food_cost.is_finite()) {
                return Err(err(f("local_food_cost"), "must be non-negative"));
            }
            if !(r.average_income > 0.0 && r.average_income.is_finite()) {
                return Err(err(f("average_income"), "must be positive"));
            }
            if !(r.residential_areas >= 1.0 && r.residential_areas.is_finite()) {
                return Err(err(f("residential_areas"), "must be at least 1"));
            }
            if let Some(k) = r.persons_per_area {
                if !(k > 0.0 && k.is_finite()) {
                    return Err(err(f("persons_per_area"), "must be positive"));
                }
            }
            if !(r.unfulfilled_unit_cost >= 0.0 && r.unfulfilled_unit_cost.is_finite()) {
                return Err(err(f("unfulfilled_unit_cost"), "must be non-negative"));
            }
            let w = r.accessibility_weights;
            if [w.affordability, w.transportation, w.quality]
                .iter()
                .any(|x| !(*x >= 0.0 && x.is_finite()))
            {
                return Err(err(f("accessibility_weights"), "must be non-negative"));
            }
            if r.dcs.is_empty() {
                return Err(err(f("dcs"), "every region needs at least one DC"));
            }
            if r.customers.is_empty() {
                return Err(err(f("customers"), "every region needs at least one customer"));
            }
            for dc in &r.dcs {
                unique("dcs.id", &dc.id)?;
                if !(dc.capacity > 0.0 && dc.capacity.is_finite()) {
                    return Err(err(format!("dcs[{}].capacity", dc.id), "must be positive"));
                }
                if !(dc.inventory_unit_cost >= 0.0 && dc.inventory_unit_cost.is_finite()) {
                    return Err(err(format!("dcs[{}].inventory_unit_cost", dc.id), "must be non-negative"));
                }
            }
            for c in &r.customers {
                unique("customers.id", &c.id)?;
                finite_point(format!("customers[{}].location", c.id), c.location)?;
                if let Some(d) = &c.demand {
                    validate_demand(&format!("customers[{}].demand", c.id), d)?;
                }
            }
        }
        for n in &self.nutrients {
            unique("nutrients.id", &n.id)?;
            for (name, v) in [
                ("weight", n.weight),
                ("min_requirement", n.min_requirement),
                ("per_kg_content", n.per_kg_content),
            ] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(err(format!("nutrients[{}].{name}", n.id), "must be non-negative"));
                }
            }
        }
        for p in &self.path_weights {
            if self.dc_index(&p.dc).is_none() {
                return Err(err("path_weights.dc", format!("unknown DC {}", p.dc)));
            }
            if self.customer_index(&p.customer).is_none() {
                return Err(err("path_weights.customer", format!("unknown customer {}", p.customer)));
            }
            if !(p.factor >= 0.0 && p.factor.is_finite()) {
                return Err(err("path_weights.factor", "must be non-negative"));
            }
        }
        validate_demand("stochastic.demand", &self.stochastic.demand)?;
        let s = self.stochastic.supply_loss;
        if !(0.0 <= s.low && s.low <= s.high && s.high <= 1.0) {
            return Err(err("stochastic.supply_loss", "need 0 <= low <= high <= 1"));
        }
        if !(0.0..=1.0).contains(&self.safety_stock_fraction) {
            return Err(err("safety_stock_fraction", "must lie in [0, 1]"));
        }
        if self.horizon < 1 {
            return Err(err("horizon", "must be at least 1"));
        }
        let sc = self.normalization_scales;
        for (name, v) in [
            ("affordability", sc.affordability),
            ("transportation", sc.transportation),
            ("quality", sc.quality),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(err(format!("normalization_scales.{name}"), "must be positive"));
                }
            }
        }
        Ok(())
    }
}

fn validate_demand(field: &str, d: &DemandSpec) -> Result<(), ValidationError> {
    if !(d.mean > 0.0 && d.mean.is_finite()) {
        return Err(ValidationError::new(field, "mean must be positive"));
    }
    if !(d.variance >= 0.0 && d.variance.is_finite()) {
        return Err(ValidationError::new(field, "variance must be non-negative"));
    }
    Ok(())
}

/// Phase I output: DC coordinates and the single-channel linkages.
///
/// `z` and `y` are stored as "supplier of" index vectors, which makes the
/// exactly-one-supplier property hold by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDesign {
    pub dc_locations: Vec<Point>,
    /// Supplying warehouse of each DC (flat DC order).
    pub dc_warehouse: Vec<usize>,
    /// Supplying DC of each customer (flat customer order).
    pub customer_dc: Vec<usize>,
    /// d_hl for every DC × customer pair.
    pub distances: Vec<Vec<f64>>,
    /// Demand-weighted distance W per region.
    pub region_objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("design lists {found} DCs but the instance has {expected}")]
    DcCount { expected: usize, found: usize },
    #[error("design lists {found} customers but the instance has {expected}")]
    CustomerCount { expected: usize, found: usize },
    #[error("unknown identifier {0} in design")]
    UnknownId(String),
    #[error("{0}")]
    Linkage(String),
    #[error("malformed design file: {0}")]
    Format(String),
}

impl NetworkDesign {
    /// Builds a design from coordinates and supplier indices, computing distances.
    pub fn new(instance: &NetworkInstance, dc_locations: Vec<Point>, dc_warehouse: Vec<usize>, customer_dc: Vec<usize>) -> Self {
        let customers: Vec<Point> = instance.customers().map(|(_, c)| c.location).collect();
        let distances = dc_locations
            .iter()
            .map(|&p| customers.iter().map(|&q| euclidean_distance(p, q)).collect())
            .collect();
        let mut design = Self {
            dc_locations,
            dc_warehouse,
            customer_dc,
            distances,
            region_objective: Vec::new(),
        };
        design.region_objective = design.weighted_distance_by_region(instance);
        design
    }

    pub fn z(&self, warehouse: usize, dc: usize) -> bool {
        self.dc_warehouse[dc] == warehouse
    }

    pub fn y(&self, dc: usize, customer: usize) -> bool {
        self.customer_dc[customer] == dc
    }

    pub fn z_matrix(&self, num_warehouses: usize) -> Vec<Vec<u8>> {
        (0..num_warehouses)
            .map(|w| (0..self.dc_warehouse.len()).map(|h| u8::from(self.z(w, h))).collect())
            .collect()
    }

    pub fn y_matrix(&self) -> Vec<Vec<u8>> {
        (0..self.dc_locations.len())
            .map(|h| (0..self.customer_dc.len()).map(|l| u8::from(self.y(h, l))).collect())
            .collect()
    }

    /// Distance from each customer to its supplying DC.
    pub fn link_distance(&self, customer: usize) -> f64 {
        self.distances[self.customer_dc[customer]][customer]
    }

    /// Customers supplied by `dc`, ascending.
    pub fn customers_of(&self, dc: usize) -> Vec<usize> {
        (0..self.customer_dc.len()).filter(|&l| self.customer_dc[l] == dc).collect()
    }

    /// Σ μ_l · d_hl per region under the current linkages.
    pub fn weighted_distance_by_region(&self, instance: &NetworkInstance) -> Vec<f64> {
        let demands = instance.customer_demands();
        let mut w = vec![0.0; instance.regions.len()];
        for (l, (node, _)) in instance.customers().enumerate() {
            w[node.region] += demands[l].mean * self.link_distance(l);
        }
        w
    }

    /// Checks structural consistency against an instance.
    pub fn validate(&self, instance: &NetworkInstance) -> Result<(), DesignError> {
        let nh = instance.num_dcs();
        let nl = instance.num_customers();
        if self.dc_locations.len() != nh || self.dc_warehouse.len() != nh || self.distances.len() != nh {
            return Err(DesignError::DcCount {
                expected: nh,
                found: self.dc_locations.len(),
            });
        }
        if self.customer_dc.len() != nl {
            return Err(DesignError::CustomerCount {
                expected: nl,
                found: self.customer_dc.len(),
            });
        }
        if let Some(&w) = self.dc_warehouse.iter().find(|&&w| w >= instance.warehouses.len()) {
            return Err(DesignError::Linkage(format!("warehouse index {w} out of range")));
        }
        let dc_region = instance.dc_region();
        let customers: Vec<_> = instance.customers().collect();
        for (l, &h) in self.customer_dc.iter().enumerate() {
            if h >= nh {
                return Err(DesignError::Linkage(format!("DC index {h} out of range")));
            }
            if dc_region[h] != customers[l].0.region {
                return Err(DesignError::Linkage(format!(
                    "customer {} is linked to a DC outside its region",
                    customers[l].1.id
                )));
            }
        }
        for (h, row) in self.distances.iter().enumerate() {
            if row.len() != nl {
                return Err(DesignError::Linkage("distance matrix has the wrong shape".into()));
            }
            for (l, &d) in row.iter().enumerate() {
                let expect = euclidean_distance(self.dc_locations[h], customers[l].1.location);
                if !(d >= 0.0) || (d - expect).abs() > 1e-6 * expect.max(1.0) {
                    return Err(DesignError::Linkage(format!(
                        "distance from DC #{h} to customer {} does not match coordinates",
                        customers[l].1.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_file(&self, instance: &NetworkInstance, iterations: usize, converged: bool) -> DesignFile {
        let dc_ids: Vec<&DistributionCenter> = instance.dcs().map(|(_, d)| d).collect();
        let dc_region = instance.dc_region();
        let customers: Vec<&Customer> = instance.customers().map(|(_, c)| c).collect();
        DesignFile {
            warehouses: instance.warehouses.iter().map(|w| w.id.clone()).collect(),
            dcs: dc_ids
                .iter()
                .enumerate()
                .map(|(h, dc)| DesignDc {
                    id: dc.id.clone(),
                    region: instance.regions[dc_region[h]].id.clone(),
                    location: self.dc_locations[h],
                    warehouse: instance.warehouses[self.dc_warehouse[h]].id.clone(),
                })
                .collect(),
            customers: customers
                .iter()
                .enumerate()
                .map(|(l, c)| DesignCustomer {
                    id: c.id.clone(),
                    dc: dc_ids[self.customer_dc[l]].id.clone(),
                    distance: self.link_distance(l),
                })
                .collect(),
            z: self.z_matrix(instance.warehouses.len()),
            y: self.y_matrix(),
            distances: self.distances.clone(),
            objective: instance
                .regions
                .iter()
                .zip(&self.region_objective)
                .map(|(r, w)| (r.id.clone(), *w))
                .collect(),
            iterations,
            converged,
        }
    }

    pub fn to_json(&self, instance: &NetworkInstance, iterations: usize, converged: bool) -> String {
        serde_json::to_string_pretty(&self.to_file(instance, iterations, converged)).expect("design serializes")
    }

    /// Rebuilds a design from its file form, resolving identifiers against `instance`.
    pub fn from_file(file: &DesignFile, instance: &NetworkInstance) -> Result<Self, DesignError> {
        let dc_pos: HashMap<&str, usize> = instance.dcs().enumerate().map(|(h, (_, d))| (d.id.as_str(), h)).collect();
        let wh_pos: HashMap<&str, usize> = instance
            .warehouses
            .iter()
            .enumerate()
            .map(|(w, x)| (x.id.as_str(), w))
            .collect();
        let nh = instance.num_dcs();
        if file.dcs.len() != nh {
            return Err(DesignError::DcCount {
                expected: nh,
                found: file.dcs.len(),
            });
        }
        let mut locations = vec![Point::default(); nh];
        let mut warehouse = vec![0; nh];
        let mut seen = vec![false; nh];
        for dc in &file.dcs {
            let h = *dc_pos.get(dc.id.as_str()).ok_or_else(|| DesignError::UnknownId(dc.id.clone()))?;
            let w = *wh_pos
                .get(dc.warehouse.as_str())
                .ok_or_else(|| DesignError::UnknownId(dc.warehouse.clone()))?;
            locations[h] = dc.location;
            warehouse[h] = w;
            seen[h] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(DesignError::Format("duplicate DC entries".into()));
        }
        let cust_pos: HashMap<&str, usize> = instance
            .customers()
            .enumerate()
            .map(|(l, (_, c))| (c.id.as_str(), l))
            .collect();
        let nl = instance.num_customers();
        if file.customers.len() != nl {
            return Err(DesignError::CustomerCount {
                expected: nl,
                found: file.customers.len(),
            });
        }
        let mut customer_dc = vec![usize::MAX; nl];
        for c in &file.customers {
            let l = *cust_pos.get(c.id.as_str()).ok_or_else(|| DesignError::UnknownId(c.id.clone()))?;
            customer_dc[l] = *dc_pos.get(c.dc.as_str()).ok_or_else(|| DesignError::UnknownId(c.dc.clone()))?;
        }
        if customer_dc.contains(&usize::MAX) {
            return Err(DesignError::Format("duplicate customer entries".into()));
        }
        let design = Self::new(instance, locations, warehouse, customer_dc);
        design.validate(instance)?;
        Ok(design)
    }

    pub fn from_json(text: &str, instance: &NetworkInstance) -> Result<Self, DesignError> {
        let file: DesignFile = serde_json::from_str(text).map_err(|e| DesignError::Format(e.to_string()))?;
        Self::from_file(&file, instance)
    }
}

/// Parses a design file and resolves it against `instance`, first resizing
/// regions whose DC count differs from the design's.
pub fn resolve_design(text: &str, instance: &NetworkInstance) -> Result<(NetworkInstance, NetworkDesign), DesignError> {
    let file: DesignFile = serde_json::from_str(text).map_err(|e| DesignError::Format(e.to_string()))?;
    let counts = design_dc_counts(&file);
    let resized = if instance.regions.iter().all(|r| counts.get(&r.id).copied().unwrap_or(0) == r.dcs.len()) {
        instance.clone()
    } else {
        instance
            .with_dc_counts(&counts)
            .map_err(|e| DesignError::Format(e.to_string()))?
    };
    let design = NetworkDesign::from_file(&file, &resized)?;
    Ok((resized, design))
}

/// DC count per region id as listed in a design file.
pub fn design_dc_counts(file: &DesignFile) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for dc in &file.dcs {
        *counts.entry(dc.region.clone()).or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub warehouses: Vec<String>,
    pub dcs: Vec<DesignDc>,
    pub customers: Vec<DesignCustomer>,
    pub z: Vec<Vec<u8>>,
    pub y: Vec<Vec<u8>>,
    pub distances: Vec<Vec<f64>>,
    pub objective: BTreeMap<String, f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignDc {
    pub id: String,
    pub region: String,
    pub location: Point,
    pub warehouse: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignCustomer {
    pub id: String,
    pub dc: String,
    pub distance: f64,
}

/// S_h: sum of the mean demands of the customers each DC supplies.
pub fn derive_mean_local_demand(design: &NetworkDesign, instance: &NetworkInstance) -> Vec<f64> {
    let demands = instance.customer_demands();
    let mut s = vec![0.0; design.dc_locations.len()];
    for (l, &h) in design.customer_dc.iter().enumerate() {
        s[h] += demands[l].mean;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> &'static str {
        crate::fixtures::MINIMAL
    }

    #[test]
    fn distance_examples() {
        assert_eq!(euclidean_distance(Point::new(0.0, 0.0), Point::new(3.0, 4.0)), 5.0);
        assert_eq!(euclidean_distance(Point::new(2.5, -1.0), Point::new(2.5, -1.0)), 0.0);
        assert_eq!(euclidean_distance(Point::new(1.0, 1.0), Point::new(4.0, 5.0)), 5.0);
    }

    #[test]
    fn minimal_instance_is_valid() {
        let inst = NetworkInstance::from_json(minimal_json()).unwrap();
        assert_eq!(inst.num_dcs(), 1);
        assert_eq!(inst.num_customers(), 1);
        assert_eq!(inst.persons_per_area, 50_000.0);
        assert_eq!(inst.nutrient_requirement(0, 0), 0.24 * 50_000.0);
    }

    #[test]
    fn safety_stock_out_of_range_is_rejected() {
        let text = minimal_json().replace("\"safety_stock_fraction\": 0.2", "\"safety_stock_fraction\": 1.5");
        match NetworkInstance::from_json(&text) {
            Err(LoadError::Validation(e)) => assert_eq!(e.field, "safety_stock_fraction"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = minimal_json().replace("\"horizon\": 5", "\"horizon\": 5, \"colour\": 1");
        assert!(matches!(NetworkInstance::from_json(&text), Err(LoadError::Parse(_))));
    }

    #[test]
    fn std_dev_is_accepted_as_alternative() {
        let text = minimal_json().replace("\"variance\": 50", "\"std_dev\": 3");
        let inst = NetworkInstance::from_json(&text).unwrap();
        assert_eq!(inst.stochastic.demand.variance, 9.0);
    }

    #[test]
    fn per_dc_order_costs() {
        let text = minimal_json().replace(
            "\"order_unit_cost\": 3",
            "\"order_unit_cost\": {\"default\": 3, \"per_dc\": {\"D1\": 4.5}}",
        );
        let inst = NetworkInstance::from_json(&text).unwrap();
        assert_eq!(inst.warehouses[0].order_unit_cost.for_dc("D1"), 4.5);
        assert_eq!(inst.warehouses[0].order_unit_cost.for_dc("D9"), 3.0);
    }

    #[test]
    fn dc_counts_resize_regions() {
        let inst = NetworkInstance::from_json(minimal_json()).unwrap();
        let grown = inst.with_dc_counts(&BTreeMap::from([("R1".to_string(), 3)])).unwrap();
        let ids: Vec<_> = grown.dcs().map(|(_, d)| d.id.clone()).collect();
        assert_eq!(ids, ["D1", "R1-DC2", "R1-DC3"]);
        assert!(inst.with_dc_counts(&BTreeMap::from([("R9".to_string(), 1)])).is_err());
    }

    #[test]
    fn design_with_other_dc_count_resizes_instance() {
        let inst = NetworkInstance::from_json(minimal_json()).unwrap();
        let grown = inst.with_dc_counts(&BTreeMap::from([("R1".to_string(), 2)])).unwrap();
        let design = NetworkDesign::new(&grown, vec![Point::new(1.0, 1.0), Point::new(9.0, 9.0)], vec![0, 0], vec![0]);
        let text = design.to_json(&grown, 3, true);
        let (resized, back) = resolve_design(&text, &inst).unwrap();
        assert_eq!(resized, grown);
        assert_eq!(back, design);
        let (same, _) = resolve_design(&text, &grown).unwrap();
        assert_eq!(same, grown);
        assert!(resolve_design("{}", &inst).is_err());
    }

    #[test]
    fn mean_local_demand_sums_assigned_means() {
        let inst = NetworkInstance::from_json(minimal_json()).unwrap();
        let two = inst.with_dc_counts(&BTreeMap::from([("R1".to_string(), 2)])).unwrap();
        let mut two = two;
        two.regions[0].customers.push(Customer {
            id: "C2".into(),
            location: Point::new(1.0, 1.0),
            demand: None,
        });
        two.regions[0].customers.push(Customer {
            id: "C3".into(),
            location: Point::new(2.0, 1.0),
            demand: Some(DemandSpec { mean: 300.0, variance: 0.0 }),
        });
        let design = NetworkDesign::new(&two, vec![Point::new(0.0, 0.0); 2], vec![0, 0], vec![0, 0, 1]);
        assert_eq!(derive_mean_local_demand(&design, &two), vec![1120.0, 300.0]);
        let idle = NetworkDesign::new(&two, vec![Point::new(0.0, 0.0); 2], vec![0, 0], vec![0, 0, 0]);
        assert_eq!(derive_mean_local_demand(&idle, &two)[1], 0.0);
    }

    #[test]
    fn design_round_trips_through_json() {
        let inst = NetworkInstance::from_json(minimal_json()).unwrap();
        let design = NetworkDesign::new(&inst, vec![Point::new(1.0, 2.0)], vec![0], vec![0]);
        let text = design.to_json(&inst, 3, true);
        let back = NetworkDesign::from_json(&text, &inst).unwrap();
        assert_eq!(back, design);
        assert_eq!(design.z_matrix(1), vec![vec![1]]);
        assert_eq!(design.y_matrix(), vec![vec![1]]);
    }
}
