mod common;

use bestsubset::baselines::exhaustive_best_subset;
use bestsubset::bnb::{self, Node, SolveStatus};
use bestsubset::{FitConfig, SelectionConstraint};
use common::{random_costs, random_instance};

fn tight() -> FitConfig {
    FitConfig {
        rel_gap_tol: 1e-9,
        abs_gap_tol: 1e-9,
        ..FitConfig::default()
    }
}

#[test]
fn matches_enumeration_n10_k3() {
    let d = random_instance(60, 10, 11);
    let cfg = tight();
    let c = SelectionConstraint::Cardinality(3.0);
    let exact = exhaustive_best_subset(&d, c, 0.02, &cfg).unwrap();
    let r = bnb::solve(&d, c, 0.02, &cfg).unwrap();
    assert_eq!(r.support, exact.support);
    assert!((r.objective - exact.objective).abs() <= 1e-6 * exact.objective.abs().max(1.0));
    assert!(r.lower_bound <= exact.objective + 1e-9);
    assert_eq!(r.status, SolveStatus::Optimal);
    eprintln!("nodes {}", r.nodes_explored);
}

#[test]
fn random_cross_check() {
    let cfg = tight();
    let mut total_nodes = 0;
    for seed in 0..40u64 {
        let n = 4 + (seed as usize % 7);
        let lambda = [0.1, 0.02, 0.004][seed as usize % 3];
        let d = random_instance(60, n, 100 + seed).with_costs(random_costs(n, seed)).unwrap();
        let c = if seed % 2 == 0 {
            SelectionConstraint::Cardinality(1.0 + (seed % 4) as f64)
        } else {
            SelectionConstraint::Budget(3.0 + (seed % 8) as f64)
        };
        let exact = exhaustive_best_subset(&d, c, lambda, &cfg).unwrap();
        let r = bnb::solve(&d, c, lambda, &cfg).unwrap();
        total_nodes += r.nodes_explored;
        assert!(
            (r.objective - exact.objective).abs() <= 1e-6 * exact.objective.abs().max(1.0),
            "seed {seed}: {} vs {}",
            r.objective,
            exact.objective
        );
        assert!(r.lower_bound <= exact.objective + 1e-6, "seed {seed}");
        let root = bnb::node_lower_bound(&d, &Node::root(), c, lambda, &cfg).unwrap();
        assert!(root <= exact.objective + 1e-6, "seed {seed} root {root} > {}", exact.objective);
    }
    eprintln!("total nodes {total_nodes}");
}
