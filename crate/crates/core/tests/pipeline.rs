//! The library stages chained end to end on the bundled instance.

use chainforge_core::des::{validate, SimConfig};
use chainforge_core::fixtures;
use chainforge_core::gfa::{run_gfa, GfaConfig};
use chainforge_core::model::resolve_design;
use chainforge_core::pareto::{epsilon_grid, sweep, ParetoSolution, SolutionPool};
use chainforge_core::stochastic::{audit_replication, BalanceForm, PlanConfig, PlanSummary, Planner};

#[test]
fn design_plan_front_and_simulation_fit_together() {
    let inst = fixtures::qatar_beef();
    let located = run_gfa(&inst, &GfaConfig::default()).unwrap();
    let text = located.design.to_json(&located.instance, located.iterations, located.converged);
    let (inst, design) = resolve_design(&text, &inst).unwrap();
    assert_eq!(design, located.design);

    let planner = Planner::new(&inst, &design, PlanConfig::default()).unwrap();
    let grid = epsilon_grid(1e-6, 1e-3, 4, true).unwrap();
    let estimates: Vec<_> = sweep(&planner, &grid, 6, 11)
        .unwrap()
        .into_iter()
        .map(|p| p.outcome.unwrap())
        .collect();
    for est in &estimates {
        for rep in &est.runs {
            assert!(audit_replication(&inst, &design, BalanceForm::Delivered, rep, 1e-6).is_empty());
        }
    }

    let pool = SolutionPool::new(estimates.iter().map(ParetoSolution::from_estimate).collect());
    let mut csv = Vec::new();
    pool.write_csv(&mut csv, true).unwrap();
    let reread = SolutionPool::read_csv(csv.as_slice()).unwrap();
    assert_eq!(reread.on_front, pool.on_front);

    let best = estimates.iter().zip(&pool.on_front).find(|(_, &on)| on).unwrap().0;
    let plan = PlanSummary::from_json(&PlanSummary::from_estimate(&planner, best).to_json()).unwrap();
    let summary = validate(&inst, &design, &plan, &SimConfig::new(&inst, 11), 4).unwrap();
    assert_eq!(summary.reports.len(), 4);
    assert!(summary.reports.iter().all(|r| r.dcs.iter().all(|d| d.balanced())));
    assert_eq!(summary.optimizer_unfulfilled_cost.mean, best.costs.unfulfilled);
}

#[test]
fn matched_seeds_share_scenarios_across_epsilons() {
    let inst = fixtures::qatar_beef();
    let located = run_gfa(&inst, &GfaConfig::default()).unwrap();
    let planner = Planner::new(&located.instance, &located.design, PlanConfig::default()).unwrap();
    let points = sweep(&planner, &[1e-6, 1e-3], 3, 5).unwrap();
    let a = points[0].outcome.as_ref().unwrap();
    let b = points[1].outcome.as_ref().unwrap();
    for (ra, rb) in a.runs.iter().zip(&b.runs) {
        assert_eq!(ra.seed, rb.seed);
        for (pa, pb) in ra.periods.iter().zip(&rb.periods) {
            assert_eq!(pa.demand, pb.demand);
            assert_eq!(pa.factors, pb.factors);
        }
    }
}
