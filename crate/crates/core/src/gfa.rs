//! Green-field DC placement: weighted geometric medians (Weiszfeld) per region,
//! alternating location–allocation for several DCs, and nearest-node linkages.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{euclidean_distance, NetworkDesign, NetworkInstance, Point, ValidationError};

/// Added to every distance so that an iterate sitting on a customer does not divide by zero.
pub const SINGULARITY_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GfaConfig {
    /// DC count per region id; regions not listed keep the instance's DC count.
    pub dc_counts: BTreeMap<String, usize>,
    pub max_iterations: usize,
    /// Movement threshold in km.
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for GfaConfig {
    fn default() -> Self {
        Self {
            dc_counts: BTreeMap::new(),
            max_iterations: 1000,
            tolerance: 1e-4,
            restarts: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GfaError {
    #[error("region {region}: {dcs} DCs requested for {customers} customers")]
    InfeasibleConfig { region: String, dcs: usize, customers: usize },
    #[error("weiszfeld needs at least one customer with positive demand")]
    NoCustomers,
    #[error("invalid GFA configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Instance(#[from] ValidationError),
}

/// A customer seen by the locator: position and mean demand μ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPoint {
    pub location: Point,
    pub weight: f64,
}

/// Demand-weighted distance W = Σ μ · d(p, a) from a single site.
pub fn weighted_distance(site: Point, points: &[WeightedPoint]) -> f64 {
    points.iter().map(|c| c.weight * euclidean_distance(site, c.location)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeiszfeldOutcome {
    pub location: Point,
    pub objective: f64,
    pub iterations: usize,
    /// False when `max_iterations` was hit before the movement fell under tolerance.
    pub converged: bool,
    /// Objective after each accepted iterate, starting with the initial point.
    pub history: Vec<f64>,
}

pub fn weighted_centroid(points: &[WeightedPoint]) -> Point {
    let total: f64 = points.iter().map(|c| c.weight).sum();
    let x = points.iter().map(|c| c.weight * c.location.x).sum::<f64>() / total;
    let y = points.iter().map(|c| c.weight * c.location.y).sum::<f64>() / total;
    Point::new(x, y)
}

/// Weighted geometric median by the Weiszfeld fixed-point iteration, started at
/// the weighted centroid.
pub fn weiszfeld_single(points: &[WeightedPoint], max_iterations: usize, tolerance: f64) -> Result<WeiszfeldOutcome, GfaError> {
    if points.is_empty() || points.iter().any(|c| !(c.weight > 0.0)) {
        return Err(GfaError::NoCustomers);
    }
    let mut site = weighted_centroid(points);
    let mut objective = weighted_distance(site, points);
    let mut history = vec![objective];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        for c in points {
            let d = euclidean_distance(site, c.location) + SINGULARITY_GUARD;
            let w = c.weight / d;
            sx += w * c.location.x;
            sy += w * c.location.y;
            sw += w;
        }
        let next = Point::new(sx / sw, sy / sw);
        iterations += 1;
        let next_obj = weighted_distance(next, points);
        // The guard can make the update overshoot by a hair near a customer;
        // never accept a worse point.
        if next_obj > objective {
            converged = true;
            break;
        }
        let moved = euclidean_distance(site, next);
        site = next;
        objective = next_obj;
        history.push(objective);
        if moved <= tolerance {
            converged = true;
            break;
        }
    }
    Ok(WeiszfeldOutcome {
        location: site,
        objective,
        iterations,
        converged,
        history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionLocation {
    pub sites: Vec<Point>,
    /// Index into `sites` for every input point.
    pub assignment: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Restart that produced this result.
    pub restart: usize,
}

/// Nearest site, lowest index on ties.
fn nearest(p: Point, sites: &[Point]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, &s) in sites.iter().enumerate() {
        let d = euclidean_distance(p, s);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

fn assignment_cost(points: &[WeightedPoint], sites: &[Point], assignment: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(c, &k)| c.weight * euclidean_distance(c.location, sites[k]))
        .sum()
}

/// Places `k` sites by alternating nearest assignment and per-cluster Weiszfeld,
/// keeping the best of `config.restarts` random starts.
pub fn locate_region(points: &[WeightedPoint], k: usize, config: &GfaConfig, stream: u64) -> Result<RegionLocation, GfaError> {
    if k == 0 {
        return Err(GfaError::Config("at least one DC per region is required".into()));
    }
    if k > points.len() {
        return Err(GfaError::InfeasibleConfig {
            region: String::new(),
            dcs: k,
            customers: points.len(),
        });
    }
    if config.restarts == 0 || !(config.tolerance > 0.0) {
        return Err(GfaError::Config("restarts must be >= 1 and tolerance > 0".into()));
    }
    if k == 1 {
        let w = weiszfeld_single(points, config.max_iterations, config.tolerance)?;
        return Ok(RegionLocation {
            sites: vec![w.location],
            assignment: vec![0; points.len()],
            objective: w.objective,
            iterations: w.iterations,
            converged: w.converged,
            restart: 0,
        });
    }
    let mut best: Option<RegionLocation> = None;
    for restart in 0..config.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::stochastic::mix_seed(config.seed ^ stream, restart as u64));
        let mut start: Vec<usize> = sample(&mut rng, points.len(), k).into_vec();
        start.sort_unstable();
        let sites: Vec<Point> = start.iter().map(|&i| points[i].location).collect();
        let run = alternate(points, sites, config)?;
        let better = best.as_ref().map_or(true, |b| run.objective < b.objective);
        if better {
            best = Some(RegionLocation { restart, ..run });
        }
    }
    Ok(best.expect("restarts >= 1"))
}

fn alternate(points: &[WeightedPoint], mut sites: Vec<Point>, config: &GfaConfig) -> Result<RegionLocation, GfaError> {
    let mut assignment: Vec<usize> = points.iter().map(|c| nearest(c.location, &sites)).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        iterations += 1;
        let mut next = sites.clone();
        for (s, site) in next.iter_mut().enumerate() {
            let cluster: Vec<WeightedPoint> = points
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == s)
                .map(|(c, _)| *c)
                .collect();
            if cluster.is_empty() {
                // Reseed an empty site at the point worst served by the others.
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = points[a].weight * euclidean_distance(points[a].location, sites[assignment[a]]);
                        let db = points[b].weight * euclidean_distance(points[b].location, sites[assignment[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("non-empty");
                *site = points[far].location;
                continue;
            }
            *site = weiszfeld_single(&cluster, config.max_iterations, config.tolerance)?.location;
        }
        let moved = sites
            .iter()
            .zip(&next)
            .map(|(a, b)| euclidean_distance(*a, *b))
            .fold(0.0, f64::max);
        sites = next;
        let reassigned: Vec<usize> = points.iter().map(|c| nearest(c.location, &sites)).collect();
        let stable = reassigned == assignment;
        assignment = reassigned;
        if stable || moved <= config.tolerance {
            converged = true;
            break;
        }
    }
    let objective = assignment_cost(points, &sites, &assignment);
    Ok(RegionLocation {
        sites,
        assignment,
        objective,
        iterations,
        converged,
        restart: 0,
    })
}

/// Links every customer to its nearest DC in the same region and every DC to
/// its nearest warehouse. Ties go to the lowest identifier.
pub fn assign_linkages(instance: &NetworkInstance, dc_locations: &[Point]) -> NetworkDesign {
    let dc_region = instance.dc_region();
    let dc_ids: Vec<&str> = instance.dcs().map(|(_, d)| d.id.as_str()).collect();
    let mut customer_dc = Vec::with_capacity(instance.num_customers());
    for (node, c) in instance.customers() {
        let mut best: Option<(f64, usize)> = None;
        for h in (0..dc_locations.len()).filter(|&h| dc_region[h] == node.region) {
            let d = euclidean_distance(c.location, dc_locations[h]);
            let take = match best {
                None => true,
                Some((bd, bh)) => d < bd || (d == bd && dc_ids[h] < dc_ids[bh]),
            };
            if take {
                best = Some((d, h));
            }
        }
        customer_dc.push(best.expect("every region has a DC").1);
    }
    let dc_warehouse = dc_locations
        .iter()
        .map(|&p| {
            let mut best: Option<(f64, usize)> = None;
            for (w, wh) in instance.warehouses.iter().enumerate() {
                let d = euclidean_distance(p, wh.location);
                let take = match best {
                    None => true,
                    Some((bd, bw)) => d < bd || (d == bd && wh.id < instance.warehouses[bw].id),
                };
                if take {
                    best = Some((d, w));
                }
            }
            best.expect("instance has a warehouse").1
        })
        .collect();
    NetworkDesign::new(instance, dc_locations.to_vec(), dc_warehouse, customer_dc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GfaResult {
    /// The instance with DC counts adjusted to the configuration.
    pub instance: NetworkInstance,
    pub design: NetworkDesign,
    /// W per region, as placed by the locator.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs Phase I over every region.
pub fn run_gfa(instance: &NetworkInstance, config: &GfaConfig) -> Result<GfaResult, GfaError> {
    let instance = if config.dc_counts.is_empty() {
        instance.clone()
    } else {
        instance.with_dc_counts(&config.dc_counts)?
    };
    let demands = instance.customer_demands();
    let mut dc_locations = Vec::with_capacity(instance.num_dcs());
    let mut objective = Vec::with_capacity(instance.regions.len());
    let mut iterations = 0;
    let mut converged = true;
    let mut offset = 0;
    for (r, region) in instance.regions.iter().enumerate() {
        let points: Vec<WeightedPoint> = region
            .customers
            .iter()
            .enumerate()
            .map(|(k, c)| WeightedPoint {
                location: c.location,
                weight: demands[offset + k].mean,
            })
            .collect();
        offset += region.customers.len();
        let located = locate_region(&points, region.dcs.len(), config, r as u64).map_err(|e| match e {
            GfaError::InfeasibleConfig { dcs, customers, .. } => GfaError::InfeasibleConfig {
                region: region.id.clone(),
                dcs,
                customers,
            },
            other => other,
        })?;
        iterations = iterations.max(located.iterations);
        converged &= located.converged;
        objective.push(located.objective);
        dc_locations.extend(located.sites);
    }
    let design = assign_linkages(&instance, &dc_locations);
    Ok(GfaResult {
        instance,
        design,
        objective,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wp(x: f64, y: f64, w: f64) -> WeightedPoint {
        WeightedPoint {
            location: Point::new(x, y),
            weight: w,
        }
    }

    #[test]
    fn single_customer_is_its_own_median() {
        let out = weiszfeld_single(&[wp(3.0, 4.0, 560.0)], 100, 1e-4).unwrap();
        assert!(euclidean_distance(out.location, Point::new(3.0, 4.0)) < 1e-9);
        assert!(out.objective < 1e-6);
    }

    #[test]
    fn equilateral_triangle_gives_centroid() {
        let pts = [wp(0.0, 0.0, 1.0), wp(10.0, 0.0, 1.0), wp(5.0, 8.6603, 1.0)];
        let out = weiszfeld_single(&pts, 1000, 1e-4).unwrap();
        assert!((out.location.x - 5.0).abs() < 1e-3);
        assert!((out.location.y - 2.8868).abs() < 1e-3);
    }

    #[test]
    fn heavy_point_attracts_the_median() {
        let pts = [wp(0.0, 0.0, 1.0), wp(10.0, 0.0, 1.0), wp(4.0, 0.0, 10.0)];
        let out = weiszfeld_single(&pts, 1000, 1e-6).unwrap();
        // Grid search along the segment at 0.01 km.
        let grid_best = (0..=1000)
            .map(|i| Point::new(i as f64 * 0.01, 0.0))
            .min_by(|a, b| weighted_distance(*a, &pts).total_cmp(&weighted_distance(*b, &pts)))
            .unwrap();
        assert!(euclidean_distance(grid_best, Point::new(4.0, 0.0)) < 1e-9);
        assert!(euclidean_distance(out.location, Point::new(4.0, 0.0)) < 1e-3);
    }

    #[test]
    fn rejects_empty_input() {
        assert_eq!(weiszfeld_single(&[], 10, 1e-4), Err(GfaError::NoCustomers));
    }

    #[test]
    fn one_site_matches_single_facility() {
        let pts = [wp(0.0, 0.0, 2.0), wp(7.0, 1.0, 1.0), wp(3.0, 9.0, 4.0)];
        let single = weiszfeld_single(&pts, 1000, 1e-4).unwrap();
        let region = locate_region(&pts, 1, &GfaConfig::default(), 0).unwrap();
        assert_eq!(region.sites, vec![single.location]);
        assert_eq!(region.objective, single.objective);
    }

    #[test]
    fn saturated_placement_has_zero_cost() {
        let pts = [wp(0.0, 0.0, 1.0), wp(7.0, 1.0, 1.0), wp(3.0, 9.0, 1.0)];
        let region = locate_region(&pts, 3, &GfaConfig::default(), 0).unwrap();
        assert!(region.objective < 1e-6);
        assert!(matches!(
            locate_region(&pts, 4, &GfaConfig::default(), 0),
            Err(GfaError::InfeasibleConfig { .. })
        ));
    }

    #[test]
    fn two_clusters_match_bipartition_enumeration() {
        let pts = [
            wp(0.0, 0.0, 1.0),
            wp(1.0, 0.5, 2.0),
            wp(0.5, 1.5, 1.0),
            wp(1.5, 1.0, 1.0),
            wp(20.0, 20.0, 1.0),
            wp(21.0, 19.0, 3.0),
            wp(19.5, 21.0, 1.0),
            wp(20.5, 20.5, 1.0),
        ];
        let located = locate_region(&pts, 2, &GfaConfig::default(), 0).unwrap();
        // Best split over all 2^n bipartitions, each side solved by Weiszfeld.
        let mut best = (f64::INFINITY, 0u32);
        for mask in 1u32..(1 << pts.len()) - 1 {
            let (a, b): (Vec<_>, Vec<_>) = (0..pts.len()).partition(|&i| mask & (1 << i) != 0);
            let side = |idx: &[usize]| {
                let sub: Vec<_> = idx.iter().map(|&i| pts[i]).collect();
                weiszfeld_single(&sub, 1000, 1e-6).unwrap().objective
            };
            let cost = side(&a) + side(&b);
            if cost < best.0 {
                best = (cost, mask);
            }
        }
        let mask = best.1;
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let same_oracle = (mask >> i & 1) == (mask >> j & 1);
                let same_found = located.assignment[i] == located.assignment[j];
                assert_eq!(same_oracle, same_found);
            }
        }
        assert!((located.objective - best.0).abs() <= 1e-3 * best.0);
    }

    #[test]
    fn linkages_follow_nearest_nodes_with_id_tie_break() {
        let inst = crate::fixtures::minimal();
        let single = assign_linkages(&inst, &[Point::new(1.0, 1.0)]);
        assert_eq!(single.customer_dc, vec![0]);
        assert_eq!(single.dc_warehouse, vec![0]);

        let two = inst.with_dc_counts(&[("R1".to_string(), 2)].into()).unwrap();
        // C1 at (3,4) is 5 km from both sites.
        let design = assign_linkages(&two, &[Point::new(6.0, 8.0), Point::new(0.0, 0.0)]);
        // "D1" sorts before "R1-DC2".
        assert_eq!(design.customer_dc, vec![0]);
    }

    #[test]
    fn bundled_layout_links_each_dc_to_its_nearest_warehouse() {
        let inst = crate::fixtures::qatar_beef();
        let out = run_gfa(&inst, &GfaConfig::default()).unwrap();
        assert_eq!(out.design.dc_locations.len(), 8);
        for (h, &p) in out.design.dc_locations.iter().enumerate() {
            let dists: Vec<f64> = inst.warehouses.iter().map(|w| euclidean_distance(p, w.location)).collect();
            for (w, &d) in dists.iter().enumerate() {
                assert!(dists[out.design.dc_warehouse[h]] <= d, "DC {h} prefers warehouse {w}");
            }
        }
        out.design.validate(&out.instance).unwrap();
    }

    #[test]
    fn runs_are_deterministic() {
        let inst = crate::fixtures::qatar_beef();
        let cfg = GfaConfig {
            seed: 7,
            ..GfaConfig::default()
        };
        let a = run_gfa(&inst, &cfg).unwrap();
        let b = run_gfa(&inst, &cfg).unwrap();
        assert_eq!(a.design, b.design);
    }

    proptest! {
        #[test]
        fn descent_holds_every_iteration(coords in prop::collection::vec((0f64..50.0, 0f64..50.0, 1f64..100.0), 1..8)) {
            let pts: Vec<_> = coords.iter().map(|&(x, y, w)| wp(x, y, w)).collect();
            let out = weiszfeld_single(&pts, 500, 1e-6).unwrap();
            for pair in out.history.windows(2) {
                prop_assert!(pair[1] <= pair[0]);
            }
        }

        #[test]
        fn translation_moves_the_median(
            coords in prop::collection::vec((0f64..50.0, 0f64..50.0, 1f64..100.0), 1..7),
            dx in -100f64..100.0, dy in -100f64..100.0,
        ) {
            let pts: Vec<_> = coords.iter().map(|&(x, y, w)| wp(x, y, w)).collect();
            let moved: Vec<_> = coords.iter().map(|&(x, y, w)| wp(x + dx, y + dy, w)).collect();
            let a = weiszfeld_single(&pts, 2000, 1e-7).unwrap();
            let b = weiszfeld_single(&moved, 2000, 1e-7).unwrap();
            let shifted = Point::new(a.location.x + dx, a.location.y + dy);
            prop_assert!((a.objective - b.objective).abs() <= 1e-4 * a.objective.max(1.0));
            prop_assert!(weighted_distance(shifted, &moved) <= b.objective * (1.0 + 1e-4) + 1e-6);
        }
    }
}
