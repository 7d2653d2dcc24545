//! Food accessibility index: affordability, transportation effort and
//! nutritional quality, each normalized to [0, 1].

use serde::Serialize;
use thiserror::Error;

use crate::model::{NetworkDesign, NetworkInstance, NutrientSpec, Region};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AccessibilityError {
    #[error("region {0} has non-positive average income")]
    Domain(String),
    #[error("shipment from DC #{dc} to customer #{customer} uses an inactive link")]
    Linkage { dc: usize, customer: usize },
    #[error("normalization: {0}")]
    Config(String),
}

/// Raw affordability C^A = l_i / s_i.
pub fn affordability(region: &Region) -> Result<f64, AccessibilityError> {
    if !(region.average_income > 0.0) {
        return Err(AccessibilityError::Domain(region.id.clone()));
    }
    Ok(region.local_food_cost / region.average_income)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shipment {
    pub dc: usize,
    pub customer: usize,
    pub kg: f64,
}

/// Raw transportation effort C^T = Σ y·f·d·c over the given shipments.
pub fn transportation_effort(
    instance: &NetworkInstance,
    design: &NetworkDesign,
    shipments: &[Shipment],
) -> Result<f64, AccessibilityError> {
    let dc_ids: Vec<&str> = instance.dcs().map(|(_, d)| d.id.as_str()).collect();
    let cust_ids: Vec<&str> = instance.customers().map(|(_, c)| c.id.as_str()).collect();
    let mut total = 0.0;
    for s in shipments {
        if !design.y(s.dc, s.customer) {
            if s.kg == 0.0 {
                continue;
            }
            return Err(AccessibilityError::Linkage {
                dc: s.dc,
                customer: s.customer,
            });
        }
        let f = instance.path_factor(dc_ids[s.dc], cust_ids[s.customer]);
        total += f * design.distances[s.dc][s.customer] * s.kg;
    }
    Ok(total)
}

/// n_ij = (Σ_h Inv_h) · β_j for every nutrient.
pub fn accessible_nutrition(total_inventory: f64, nutrients: &[NutrientSpec]) -> Vec<f64> {
    nutrients.iter().map(|n| total_inventory * n.per_kg_content).collect()
}

/// Raw quality C^Q = Σ_j q_j · (n_j − req_j)^+.
pub fn quality_index(nutrition: &[f64], requirements: &[f64], nutrients: &[NutrientSpec]) -> f64 {
    nutrients
        .iter()
        .zip(nutrition.iter().zip(requirements))
        .map(|(n, (&amount, &req))| n.weight * plus(amount - req))
        .sum()
}

/// Requirements `r_j · p_i · κ` of every nutrient in `region`.
pub fn requirements(instance: &NetworkInstance, region: usize) -> Vec<f64> {
    (0..instance.nutrients.len())
        .map(|j| instance.nutrient_requirement(region, j))
        .collect()
}

pub fn plus(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// I = C / C1. Raw values may exceed the scale only by rounding noise.
pub fn normalize(raw: f64, scale: f64) -> Result<f64, AccessibilityError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(AccessibilityError::Config(format!("scale {scale} must be positive")));
    }
    let slack = 1e-9 * scale;
    if !(raw >= -slack && raw <= scale + slack) {
        return Err(AccessibilityError::Config(format!("raw value {raw} lies outside [0, {scale}]")));
    }
    Ok((raw / scale).clamp(0.0, 1.0))
}

/// Resolved normalization constants C1^A, C1^T, C1^Q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scales {
    pub affordability: f64,
    pub transportation: f64,
    pub quality: f64,
}

/// Upper bounds on the raw indices reachable by any plan of `design`.
///
/// C^T is bounded per link by `f·d·(Cap_h + Cap_w)`: a DC can never ship more
/// in one period than it held plus everything its warehouse could deliver.
/// C^Q is bounded by every DC of the region being full.
pub fn scale_bounds(instance: &NetworkInstance, design: &NetworkDesign) -> Scales {
    let affordability = instance
        .regions
        .iter()
        .map(|r| r.local_food_cost / r.average_income)
        .fold(0.0, f64::max);
    let dcs: Vec<_> = instance.dcs().map(|(_, d)| d).collect();
    let customers: Vec<_> = instance.customers().map(|(_, c)| c).collect();
    let mut transportation = 0.0;
    for (l, &h) in design.customer_dc.iter().enumerate() {
        let f = instance.path_factor(&dcs[h].id, &customers[l].id);
        let cap = dcs[h].capacity + instance.warehouses[design.dc_warehouse[h]].capacity;
        transportation += f * design.distances[h][l] * cap;
    }
    let total_cap: f64 = dcs.iter().map(|d| d.capacity).sum();
    let quality = instance
        .nutrients
        .iter()
        .map(|n| n.weight * n.per_kg_content)
        .sum::<f64>()
        * total_cap;
    Scales {
        affordability,
        transportation,
        quality,
    }
}

/// Configured scales, falling back to [`scale_bounds`]. A configured scale
/// below the reachable bound is rejected, since it would let indices leave [0, 1].
pub fn resolve_scales(instance: &NetworkInstance, design: &NetworkDesign) -> Result<Scales, AccessibilityError> {
    let bounds = scale_bounds(instance, design);
    let cfg = instance.normalization_scales;
    let pick = |name: &str, user: Option<f64>, bound: f64| -> Result<f64, AccessibilityError> {
        match user {
            Some(s) if s < bound * (1.0 - 1e-12) => Err(AccessibilityError::Config(format!(
                "{name} scale {s} is below the reachable maximum {bound}"
            ))),
            Some(s) => Ok(s),
            // A zero bound means the index is identically zero; any positive scale works.
            None => Ok(if bound > 0.0 { bound } else { 1.0 }),
        }
    };
    Ok(Scales {
        affordability: pick("affordability", cfg.affordability, bounds.affordability)?,
        transportation: pick("transportation", cfg.transportation, bounds.transportation)?,
        quality: pick("quality", cfg.quality, bounds.quality)?,
    })
}

/// All three indices of one region in one period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccessibilitySnapshot {
    pub region: usize,
    pub period: usize,
    pub raw: [f64; 3],
    pub normalized: [f64; 3],
    pub accessible_nutrition: Vec<f64>,
}

impl AccessibilitySnapshot {
    /// Weighted contribution w^A·I^A − w^T·I^T + w^Q·I^Q.
    pub fn weighted(&self, region: &Region) -> f64 {
        let w = region.accessibility_weights;
        w.affordability * self.normalized[0] - w.transportation * self.normalized[1] + w.quality * self.normalized[2]
    }
}

/// Evaluates a region's indices from its inventories and shipments.
pub fn snapshot(
    instance: &NetworkInstance,
    design: &NetworkDesign,
    scales: &Scales,
    region: usize,
    period: usize,
    region_inventory: f64,
    shipments: &[Shipment],
) -> Result<AccessibilitySnapshot, AccessibilityError> {
    let ca = affordability(&instance.regions[region])?;
    let ct = transportation_effort(instance, design, shipments)?;
    let n = accessible_nutrition(region_inventory, &instance.nutrients);
    let cq = quality_index(&n, &requirements(instance, region), &instance.nutrients);
    Ok(AccessibilitySnapshot {
        region,
        period,
        raw: [ca, ct, cq],
        normalized: [
            normalize(ca, scales.affordability)?,
            normalize(ct, scales.transportation)?,
            normalize(cq, scales.quality)?,
        ],
        accessible_nutrition: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Point, Region};
    use proptest::prelude::*;

    fn region(l: f64, s: f64) -> Region {
        Region {
            id: "R".into(),
            local_food_cost: l,
            average_income: s,
            residential_areas: 1.0,
            unfulfilled_unit_cost: 5.0,
            accessibility_weights: Default::default(),
            persons_per_area: None,
            dcs: vec![],
            customers: vec![],
        }
    }

    fn nutrient(q: f64, r: f64, beta: f64) -> NutrientSpec {
        NutrientSpec {
            id: "n".into(),
            weight: q,
            min_requirement: r,
            per_kg_content: beta,
        }
    }

    #[test]
    fn affordability_examples() {
        let a = affordability(&region(21.77, 275_626.0)).unwrap();
        assert_eq!(a, 21.77 / 275_626.0);
        assert!((a - 7.8984e-5).abs() < 5e-10);
        assert_eq!(affordability(&region(0.0, 275_626.0)).unwrap(), 0.0);
        let b = affordability(&region(21.77, 241_036.0)).unwrap();
        assert!((b - 9.0318e-5).abs() < 5e-10);
        assert!(affordability(&region(1.0, 0.0)).is_err());
    }

    #[test]
    fn nutrition_examples() {
        assert_eq!(accessible_nutrition(100.0, &[nutrient(1.0, 0.24, 22.0)]), vec![2200.0]);
        assert_eq!(accessible_nutrition(0.0, &[nutrient(1.0, 0.24, 22.0), nutrient(1.0, 24.0, 240.0)]), vec![0.0, 0.0]);
        assert_eq!(accessible_nutrition(1.0, &[nutrient(1.0, 24.0, 240.0)]), vec![240.0]);
    }

    #[test]
    fn quality_examples() {
        let n = [nutrient(1.0, 0.0, 1.0)];
        assert_eq!(quality_index(&[120.0], &[120.0], &n), 0.0);
        assert_eq!(quality_index(&[150.0], &[120.0], &n), 30.0);
        // Region with p = 2 at κ = 50,000, zinc only, 2,000 kg in stock.
        let zn = [nutrient(1.0, 0.24, 22.0)];
        let req = 0.24 * 2.0 * 50_000.0;
        let amount = accessible_nutrition(2_000.0, &zn);
        assert_eq!(quality_index(&amount, &[req], &zn), 20_000.0);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(0.0, 8.0).unwrap(), 0.0);
        assert_eq!(normalize(8.0, 8.0).unwrap(), 1.0);
        assert_eq!(normalize(4.0, 8.0).unwrap(), 0.5);
        assert!(normalize(9.0, 8.0).is_err());
        assert!(normalize(1.0, 0.0).is_err());
    }

    #[test]
    fn transportation_examples() {
        let inst = crate::fixtures::minimal();
        let mut two = inst.with_dc_counts(&[("R1".to_string(), 2)].into()).unwrap();
        two.regions[0].customers.push(crate::model::Customer {
            id: "C2".into(),
            location: Point::new(0.0, 3.0),
            demand: None,
        });
        two.path_weights.push(crate::model::PathWeight {
            dc: "R1-DC2".into(),
            customer: "C2".into(),
            factor: 2.0,
        });
        let design = NetworkDesign::new(&two, vec![Point::new(0.0, 0.0); 2], vec![0, 0], vec![0, 1]);
        let single = [Shipment { dc: 0, customer: 0, kg: 100.0 }];
        assert_eq!(transportation_effort(&two, &design, &single).unwrap(), 500.0);
        assert_eq!(transportation_effort(&two, &design, &[]).unwrap(), 0.0);
        let bad = [Shipment { dc: 1, customer: 0, kg: 1.0 }];
        assert!(matches!(
            transportation_effort(&two, &design, &bad),
            Err(AccessibilityError::Linkage { .. })
        ));
    }

    #[test]
    fn transportation_two_link_hand_value() {
        // f=1, d=2, c=10 and f=2, d=3, c=5.
        let inst = crate::fixtures::minimal();
        let mut two = inst.with_dc_counts(&[("R1".to_string(), 2)].into()).unwrap();
        two.regions[0].customers[0].location = Point::new(2.0, 0.0);
        two.regions[0].customers.push(crate::model::Customer {
            id: "C2".into(),
            location: Point::new(0.0, 3.0),
            demand: None,
        });
        two.path_weights.push(crate::model::PathWeight {
            dc: "R1-DC2".into(),
            customer: "C2".into(),
            factor: 2.0,
        });
        let design = NetworkDesign::new(&two, vec![Point::new(0.0, 0.0); 2], vec![0, 0], vec![0, 1]);
        let both = [
            Shipment { dc: 0, customer: 0, kg: 10.0 },
            Shipment { dc: 1, customer: 1, kg: 5.0 },
        ];
        assert_eq!(transportation_effort(&two, &design, &both).unwrap(), 50.0);
    }

    proptest! {
        #[test]
        fn plus_function_is_exact(n in -1e6f64..1e6, req in 0f64..1e6) {
            let spec = [nutrient(1.0, 0.0, 1.0)];
            prop_assert_eq!(quality_index(&[n], &[req], &spec), (n - req).max(0.0));
        }

        #[test]
        fn quality_is_monotone_in_inventory(inv in 0f64..1e4, extra in 0f64..1e3) {
            let spec = [nutrient(1.0, 0.24, 22.0), nutrient(2.0, 0.0876, 25.0)];
            let req = [0.24 * 1e5, 0.0876 * 1e5];
            let lo = accessible_nutrition(inv, &spec);
            let hi = accessible_nutrition(inv + extra, &spec);
            prop_assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b));
            prop_assert!(quality_index(&lo, &req, &spec) <= quality_index(&hi, &req, &spec));
        }

        #[test]
        fn transportation_is_linear(kg in 0f64..1e4) {
            let inst = crate::fixtures::minimal();
            let design = NetworkDesign::new(&inst, vec![Point::new(0.0, 0.0)], vec![0], vec![0]);
            let one = transportation_effort(&inst, &design, &[Shipment { dc: 0, customer: 0, kg }]).unwrap();
            let two = transportation_effort(&inst, &design, &[Shipment { dc: 0, customer: 0, kg: 2.0 * kg }]).unwrap();
            prop_assert!((two - 2.0 * one).abs() <= 1e-9 * two.abs().max(1.0));
        }
    }
}
