mod common;

use bestsubset::baselines::exhaustive_best_subset;
use bestsubset::bnb::{self, branch_select, Node, Relaxation, SolveStatus};
use bestsubset::logistic::fit_support;
use bestsubset::{Dataset, FitConfig, SelectionConstraint};
use common::{random_costs, random_instance};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn tight() -> FitConfig {
    FitConfig {
        rel_gap_tol: 1e-9,
        abs_gap_tol: 1e-9,
        ..FitConfig::default()
    }
}

fn node(fixed_in: &[usize], fixed_out: &[usize]) -> Node {
    Node {
        fixed_in: fixed_in.to_vec(),
        fixed_out: fixed_out.to_vec(),
        lower_bound: f64::NEG_INFINITY,
        depth: fixed_in.len() + fixed_out.len(),
    }
}

#[test]
fn inactive_budget_gives_full_fit() {
    let cfg = tight();
    let d = random_instance(60, 6, 3).with_costs(random_costs(6, 3)).unwrap();
    let total: f64 = d.costs().unwrap().iter().sum();
    let r = bnb::solve(&d, SelectionConstraint::Budget(total), 0.02, &cfg).unwrap();
    let full = fit_support(&d, &[0, 1, 2, 3, 4, 5], 0.02, &cfg).unwrap();
    assert!((r.objective - full.objective.total).abs() <= 1e-9 * full.objective.total);
    assert_eq!(r.support.len(), 6);
}

#[test]
fn objective_is_monotone_in_budget_and_cardinality() {
    let cfg = tight();
    for seed in 0..6 {
        let d = random_instance(60, 8, 40 + seed).with_costs(random_costs(8, seed)).unwrap();
        let mut prev = f64::INFINITY;
        for b in 0..=20 {
            let r = bnb::solve(&d, SelectionConstraint::Budget(b as f64), 0.02, &cfg).unwrap();
            assert!(r.objective <= prev + 1e-8, "seed {seed} budget {b}");
            assert!(d.costs().unwrap().iter().enumerate().filter(|(j, _)| r.support.contains(j)).map(|(_, c)| c).sum::<f64>() <= b as f64);
            prev = r.objective;
        }
        let mut prev = f64::INFINITY;
        for k in 1..=8 {
            let r = bnb::solve(&d, SelectionConstraint::Cardinality(k as f64), 0.02, &cfg).unwrap();
            assert!(r.objective <= prev + 1e-8, "seed {seed} k {k}");
            assert!(r.support.len() <= k);
            prev = r.objective;
        }
    }
}

#[test]
fn negative_budget_is_infeasible() {
    let d = random_instance(40, 4, 1).with_costs(vec![1.0; 4]).unwrap();
    assert!(matches!(
        bnb::solve(&d, SelectionConstraint::Budget(-1.0), 0.1, &tight()),
        Err(bestsubset::Error::Infeasible)
    ));
}

#[test]
fn result_invariants_hold() {
    let cfg = FitConfig::default();
    for seed in 0..10 {
        let d = random_instance(80, 12, 200 + seed);
        let r = bnb::solve(&d, SelectionConstraint::Cardinality(3.0), 0.004, &cfg).unwrap();
        assert!(r.objective >= r.lower_bound - 1e-9);
        let gap = (r.objective - r.lower_bound) / r.objective.abs().max(1.0);
        assert!((r.rel_gap - gap.max(0.0)).abs() < 1e-12);
        assert!(r.status.is_certified());
        for (j, &t) in r.params.theta.iter().enumerate() {
            assert_eq!(t != 0.0, r.support.contains(&j), "seed {seed} feature {j}");
        }
    }
}

#[test]
fn root_bound_never_exceeds_optimum() {
    let cfg = tight();
    for trial in 0..1000u64 {
        let d = random_instance(40, 8, 5000 + trial);
        let c = SelectionConstraint::Cardinality(1.0 + (trial % 4) as f64);
        let lambda = [0.1, 0.02, 0.004][trial as usize % 3];
        let exact = exhaustive_best_subset(&d, c, lambda, &cfg).unwrap();
        let root = bnb::node_lower_bound(&d, &Node::root(), c, lambda, &cfg).unwrap();
        assert!(root <= exact.objective + 1e-6, "trial {trial}: {root} > {}", exact.objective);
    }
}

#[test]
fn bound_at_zero_multiplier_is_ridge_fit() {
    let cfg = tight();
    let d = random_instance(60, 6, 8);
    let c = SelectionConstraint::Cardinality(2.0);
    let n = node(&[1], &[4]);
    let v = bnb::node_bound_at_multiplier(&d, &n, c, 0.02, 0.0, &cfg).unwrap();
    let ridge = fit_support(&d, &[0, 1, 2, 3, 5], 0.02, &cfg).unwrap();
    assert!((v - ridge.objective.total).abs() <= 1e-6, "{v} vs {}", ridge.objective.total);
}

#[test]
fn fully_fixed_node_bound_is_the_fit() {
    let cfg = tight();
    let d = random_instance(60, 5, 9);
    let c = SelectionConstraint::Cardinality(3.0);
    let n = node(&[0, 3], &[1, 2, 4]);
    let v = bnb::node_lower_bound(&d, &n, c, 0.02, &cfg).unwrap();
    let fit = fit_support(&d, &[0, 3], 0.02, &cfg).unwrap();
    assert_eq!(v, fit.objective.total);
}

#[test]
fn heuristic_is_an_upper_bound() {
    let cfg = tight();
    for seed in 0..30u64 {
        let n = 4 + seed as usize % 7;
        let d = random_instance(60, n, 900 + seed).with_costs(random_costs(n, seed)).unwrap();
        for c in [SelectionConstraint::Cardinality(2.0), SelectionConstraint::Budget(8.0)] {
            let exact = exhaustive_best_subset(&d, c, 0.02, &cfg).unwrap();
            let (support, obj) = bnb::incumbent_heuristic(&d, &Node::root(), c, 0.02, &cfg).unwrap();
            assert!(c.admits(&d, &support).unwrap());
            assert!(obj.total >= exact.objective - 1e-9, "seed {seed}");
        }
    }
    // no free features: the fixed-in refit comes back
    let d = random_instance(60, 3, 1);
    let (support, obj) = bnb::incumbent_heuristic(&d, &node(&[2], &[0, 1]), SelectionConstraint::Cardinality(2.0), 0.1, &cfg).unwrap();
    assert_eq!(support, vec![2]);
    assert_eq!(obj, fit_support(&d, &[2], 0.1, &cfg).unwrap().objective);
}

#[test]
fn branching_prefers_large_coefficients_and_low_index_on_ties() {
    let r = Relaxation {
        theta: vec![0.5, -2.0, 2.0, 1.0],
        theta0: 0.0,
        mu: 0.0,
        bound: 0.0,
    };
    assert_eq!(branch_select(&Node::root(), &r), Some(1));
    assert_eq!(branch_select(&node(&[1], &[]), &r), Some(2));
    assert_eq!(branch_select(&node(&[0, 1, 2, 3], &[]), &r), None);

    // duplicated column: symmetric relaxation, lower index wins
    let base = random_instance(50, 3, 4);
    let mut cols: Vec<f64> = base.x().as_slice().to_vec();
    cols.extend_from_slice(base.column(0));
    let d = Dataset::from_matrix(DMatrix::from_vec(50, 4, cols), base.y().to_vec()).unwrap();
    let relax = bnb::node_relaxation(&d, &Node::root(), SelectionConstraint::Cardinality(1.0), 0.02, &tight()).unwrap();
    if let Some(j) = branch_select(&Node::root(), &relax) {
        assert_ne!(j, 3, "duplicate of feature 0 must not win a tie");
    }
}

#[test]
fn repeated_solves_are_bit_identical_across_pools() {
    let cfg = FitConfig::default();
    let d = random_instance(120, 16, 77).with_costs(random_costs(16, 77)).unwrap();
    let c = SelectionConstraint::Budget(12.0);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bnb::solve(&d, c, 0.004, &cfg).unwrap())
    };
    let a = run(1);
    for threads in [1, 2, 8] {
        let b = run(threads);
        assert_eq!(a.support, b.support);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.lower_bound.to_bits(), b.lower_bound.to_bits());
        assert_eq!(a.nodes_explored, b.nodes_explored);
    }
}

#[test]
fn node_limit_keeps_an_honest_gap() {
    let cfg = FitConfig {
        max_nodes: Some(2),
        ..FitConfig::default()
    };
    let d = random_instance(80, 20, 5);
    let r = bnb::solve(&d, SelectionConstraint::Cardinality(5.0), 0.004, &cfg).unwrap();
    if r.status == SolveStatus::NodeLimit {
        assert!(r.nodes_explored <= 2);
        let full = bnb::solve(&d, SelectionConstraint::Cardinality(5.0), 0.004, &tight()).unwrap();
        assert!(r.lower_bound <= full.objective + 1e-6);
        assert!(r.objective >= full.objective - 1e-6);
    }
}

#[test]
fn trace_reports_every_node_with_monotone_incumbent() {
    let d = random_instance(80, 12, 13);
    let mut trace = Vec::new();
    let r = bnb::solve_traced(&d, SelectionConstraint::Cardinality(4.0), 0.02, &FitConfig::default(), |t| trace.push(*t)).unwrap();
    assert_eq!(trace.len() as u64, r.nodes_explored);
    for w in trace.windows(2) {
        assert!(w[1].incumbent <= w[0].incumbent);
    }
    let json = serde_json::to_string(&trace[0]).unwrap();
    for key in ["depth", "bound", "incumbent", "gap"] {
        assert!(json.contains(&format!("\"{key}\"")));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn certificate_is_sound(seed in 0u64..1_000_000, n in 2usize..9, k in 1usize..5, lam in 0usize..3) {
        let cfg = FitConfig::default();
        let d = random_instance(50, n, seed);
        let lambda = [0.1, 0.02, 0.004][lam];
        let c = SelectionConstraint::Cardinality(k as f64);
        let r = bnb::solve(&d, c, lambda, &cfg).unwrap();
        let exact = exhaustive_best_subset(&d, c, lambda, &cfg).unwrap();
        prop_assert!(exact.objective >= r.lower_bound - 1e-6);
        prop_assert!(r.objective <= exact.objective * (1.0 + cfg.rel_gap_tol) + cfg.abs_gap_tol + 1e-9);
    }
}
