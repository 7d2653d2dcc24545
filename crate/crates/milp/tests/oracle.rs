//! Cross-checks against an independent LP solver (microlp) and brute force.

use chainforge_milp::{
    solve_lp, solve_milp, LinearModel, Relation, Sense, SolveResult, Status, VarId, VarKind, FEASIBILITY_TOL,
};
use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random model built around a known feasible point so most instances are feasible.
fn random_model(seed: u64, max_bin: usize, max_cont: usize, max_rows: usize) -> (LinearModel, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = LinearModel::new(format!("rand{seed}"));
    if rng.random_bool(0.3) {
        m.set_sense(Sense::Minimize);
    }
    let nb = rng.random_range(0..=max_bin);
    let nc = rng.random_range(1..=max_cont);
    let mut point = Vec::new();
    for i in 0..nc {
        let lo = if rng.random_bool(0.2) { -(rng.random_range(0..4) as f64) } else { 0.0 };
        let hi = lo + rng.random_range(1..8) as f64;
        let v = m.add_continuous(format!("x{i}"), lo, hi);
        point.push(rng.random_range(lo..=hi));
        m.set_objective(v, (rng.random_range(-50..=50) as f64) / 10.0);
    }
    for i in 0..nb {
        let v = m.add_binary(format!("b{i}"));
        point.push(if rng.random_bool(0.5) { 1.0 } else { 0.0 });
        m.set_objective(v, (rng.random_range(-50..=50) as f64) / 10.0);
    }
    let ids: Vec<VarId> = m.var_ids().collect();
    let rows = rng.random_range(1..=max_rows);
    for r in 0..rows {
        let mut terms = Vec::new();
        for &id in &ids {
            if rng.random_bool(0.6) {
                terms.push((id, rng.random_range(-6..=6) as f64));
            }
        }
        let act: f64 = terms.iter().map(|&(v, a)| a * point[v.index()]).sum();
        let rel = match rng.random_range(0..10) {
            0 => Relation::Eq,
            1..=2 => Relation::Ge,
            _ => Relation::Le,
        };
        let slack = rng.random_range(0..4) as f64;
        let rhs = match rel {
            Relation::Le => act + slack,
            Relation::Ge => act - slack,
            Relation::Eq => act,
        };
        m.add_constraint(format!("r{r}"), terms, rel, rhs);
    }
    (m, point)
}

/// Reference LP optimum with some variables fixed. `None` if infeasible.
fn reference_lp(m: &LinearModel, fixed: &[Option<f64>]) -> Result<Option<f64>, ()> {
    let dir = match m.sense() {
        Sense::Maximize => OptimizationDirection::Maximize,
        Sense::Minimize => OptimizationDirection::Minimize,
    };
    let mut p = Problem::new(dir);
    let mut constant = 0.0;
    let mut vars = Vec::new();
    for (j, v) in m.variables().iter().enumerate() {
        match fixed[j] {
            Some(val) => {
                constant += m.objective()[j] * val;
                vars.push(None);
            }
            None => vars.push(Some(p.add_var(m.objective()[j], (v.lower, v.upper)))),
        }
    }
    for c in m.constraints() {
        let mut expr = LinearExpr::empty();
        let mut rhs = c.rhs;
        for &(v, a) in &c.terms {
            match (vars[v.index()], fixed[v.index()]) {
                (Some(x), _) => expr.add(x, a),
                (None, Some(val)) => rhs -= a * val,
                _ => unreachable!(),
            }
        }
        let op = match c.relation {
            Relation::Le => ComparisonOp::Le,
            Relation::Ge => ComparisonOp::Ge,
            Relation::Eq => ComparisonOp::Eq,
        };
        p.add_constraint(expr, op, rhs);
    }
    match p.solve() {
        Ok(sol) => Ok(Some(sol.objective() + constant)),
        Err(microlp::Error::Infeasible) => Ok(None),
        Err(_) => Err(()),
    }
}

fn enumerate_binaries(m: &LinearModel) -> Option<f64> {
    let bins: Vec<usize> = m.binaries().map(|v| v.index()).collect();
    let better = |a: f64, b: f64| match m.sense() {
        Sense::Maximize => a > b,
        Sense::Minimize => a < b,
    };
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut fixed = vec![None; m.num_vars()];
        for (k, &b) in bins.iter().enumerate() {
            fixed[b] = Some(((mask >> k) & 1) as f64);
        }
        if let Some(v) = reference_lp(m, &fixed).expect("reference solver failed") {
            if best.map_or(true, |b| better(v, b)) {
                best = Some(v);
            }
        }
    }
    best
}

fn assert_feasible(m: &LinearModel, r: &SolveResult) {
    assert!(m.max_violation(&r.values) <= FEASIBILITY_TOL, "violation {}", m.max_violation(&r.values));
    for (v, x) in m.variables().iter().zip(&r.values) {
        if v.kind == VarKind::Binary {
            assert!(*x == 0.0 || *x == 1.0, "binary {} = {x}", v.name);
        }
    }
}

#[test]
fn milp_matches_enumeration_on_random_instances() {
    let mut feasible = 0;
    for seed in 0..200 {
        let (m, _) = random_model(seed, 10, 8, 6);
        let oracle = enumerate_binaries(&m);
        let r = solve_milp(&m).unwrap();
        match oracle {
            Some(best) => {
                feasible += 1;
                assert_eq!(r.status, Status::Optimal, "seed {seed}");
                assert!((r.objective - best).abs() <= 1e-6, "seed {seed}: {} vs {best}", r.objective);
                assert_feasible(&m, &r);
            }
            None => assert_eq!(r.status, Status::Infeasible, "seed {seed}"),
        }
    }
    assert_eq!(feasible, 200);
}

#[test]
fn lp_matches_reference_solver() {
    for seed in 1000..1400 {
        let (m, _) = random_model(seed, 0, 8, 8);
        let r = solve_lp(&m).unwrap();
        let reference = reference_lp(&m, &vec![None; m.num_vars()]).expect("reference solver failed");
        let best = reference.expect("instances are built around a feasible point");
        assert_eq!(r.status, Status::Optimal, "seed {seed}");
        assert!((r.objective - best).abs() <= 1e-7 * best.abs().max(1.0), "seed {seed}: {} vs {best}", r.objective);
        assert_feasible(&m, &r);
    }
}

#[test]
fn unbounded_directions_agree_with_reference() {
    let mut seen = 0;
    for seed in 2000..2300 {
        let (mut m, _) = random_model(seed, 0, 5, 3);
        // Open up every bound so that some instances become unbounded.
        let ids: Vec<VarId> = m.var_ids().collect();
        for id in ids {
            m.set_bounds(id, 0.0, f64::INFINITY);
        }
        let r = solve_lp(&m).unwrap();
        let dir = match m.sense() {
            Sense::Maximize => OptimizationDirection::Maximize,
            Sense::Minimize => OptimizationDirection::Minimize,
        };
        let mut p = Problem::new(dir);
        let vars: Vec<_> = m.objective().iter().map(|&c| p.add_var(c, (0.0, f64::INFINITY))).collect();
        for c in m.constraints() {
            let mut e = LinearExpr::empty();
            for &(v, a) in &c.terms {
                e.add(vars[v.index()], a);
            }
            let op = match c.relation {
                Relation::Le => ComparisonOp::Le,
                Relation::Ge => ComparisonOp::Ge,
                Relation::Eq => ComparisonOp::Eq,
            };
            p.add_constraint(e, op, c.rhs);
        }
        match p.solve() {
            Ok(sol) => {
                assert_eq!(r.status, Status::Optimal, "seed {seed}");
                assert!((r.objective - sol.objective()).abs() <= 1e-7 * sol.objective().abs().max(1.0));
            }
            Err(microlp::Error::Unbounded) => {
                seen += 1;
                assert_eq!(r.status, Status::Unbounded, "seed {seed}");
            }
            Err(microlp::Error::Infeasible) => assert_eq!(r.status, Status::Infeasible, "seed {seed}"),
            Err(e) => panic!("reference failed: {e}"),
        }
    }
    assert!(seen > 0);
}

#[test]
fn weak_duality_spot_check() {
    // Any feasible point must not beat the reported optimum.
    let mut checked = 0;
    for seed in 3000..3100 {
        let (m, _) = random_model(seed, 0, 6, 5);
        let r = solve_lp(&m).unwrap();
        assert_eq!(r.status, Status::Optimal);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sign = if m.sense() == Sense::Maximize { 1.0 } else { -1.0 };
        for _ in 0..2000 {
            let x: Vec<f64> = m.variables().iter().map(|v| rng.random_range(v.lower..=v.upper)).collect();
            if m.max_violation(&x) > 0.0 {
                continue;
            }
            checked += 1;
            assert!(sign * m.evaluate_objective(&x) <= sign * r.objective + 1e-6, "seed {seed}");
        }
    }
    assert!(checked > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solves_are_deterministic(seed in 0u64..100_000) {
        let (m, _) = random_model(seed, 8, 6, 6);
        let a = solve_milp(&m).unwrap();
        let b = solve_milp(&m.clone()).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        prop_assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(a.nodes, b.nodes);
    }

    #[test]
    fn optimal_lp_solutions_are_feasible(seed in 0u64..100_000) {
        let (m, point) = random_model(seed, 0, 8, 8);
        let r = solve_lp(&m).unwrap();
        prop_assert_eq!(r.status, Status::Optimal);
        prop_assert!(m.max_violation(&r.values) <= FEASIBILITY_TOL);
        let sign = if m.sense() == Sense::Maximize { 1.0 } else { -1.0 };
        prop_assert!(sign * m.evaluate_objective(&point) <= sign * r.objective + 1e-6);
    }
}
