mod common;

use bestsubset::conic::{build_program, check_external, witness, ConicProgram, ExternalSolution};
use bestsubset::logistic::fit_support;
use bestsubset::{solve, Dataset, FitConfig, SelectionConstraint};
use nalgebra::DMatrix;

const GOLDEN: &str = include_str!("data/toy_card1.cbf");

fn toy() -> Dataset {
    let x = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 0.5, 0.25, 1.0, 0.0]);
    Dataset::from_matrix(x, vec![1.0, -1.0, 1.0]).unwrap()
}

#[test]
fn toy_program_matches_golden_file() {
    let p = build_program(&toy(), SelectionConstraint::Cardinality(1.0), 0.1).unwrap();
    let text = p.to_cbf();
    if std::env::var_os("BESTSUBSET_BLESS").is_some() {
        std::fs::write(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/toy_card1.cbf"), &text).unwrap();
    }
    assert_eq!(text, GOLDEN);
    assert_eq!(ConicProgram::from_cbf(GOLDEN).unwrap(), p);
}

#[test]
fn export_parse_export_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..20u64 {
        let n = 2 + (seed as usize % 5);
        let m = 10 + 3 * seed as usize;
        let d = common::random_instance(m, n, 700 + seed);
        let lambda = [0.1, 0.02, 0.004][seed as usize % 3];
        let (d, constraint) = if seed % 2 == 0 {
            (d, SelectionConstraint::Cardinality(1.0 + (seed % 3) as f64))
        } else {
            let d = d.with_costs(common::random_costs(n, seed)).unwrap();
            (d, SelectionConstraint::Budget(10.0))
        };
        let p = build_program(&d, constraint, lambda).unwrap();
        let path = dir.path().join(format!("p{seed}.cbf"));
        bestsubset::conic::export_cbf(&p, &path).unwrap();
        let q = bestsubset::conic::parse_cbf(&path).unwrap();
        assert_eq!(p, q, "seed {seed}");
        assert_eq!(std::fs::read_to_string(&path).unwrap(), q.to_cbf(), "seed {seed}");
        let s = p.summary();
        assert_eq!((s.integer, s.exp_cones, s.rotated_cones, s.linear_rows), (n, 2 * m, n, m + 1));
    }
}

#[test]
fn witness_of_optimal_solution_is_feasible_and_exact() {
    let cfg = FitConfig::default();
    for seed in 0..6u64 {
        let d = common::random_instance(40, 6, 900 + seed);
        let lambda = [0.1, 0.02, 0.004][seed as usize % 3];
        let constraint = SelectionConstraint::Cardinality(2.0);
        let res = solve(&d, constraint, lambda, &cfg).unwrap();
        let p = build_program(&d, constraint, lambda).unwrap();
        let x = witness(&d, &res.params, &res.support).unwrap();
        assert!(p.max_violation(&x).unwrap() <= 1e-9);
        let obj = p.objective_value(&x);
        assert!((obj - res.objective).abs() <= 1e-9 * res.objective.abs().max(1.0));
        let refit = fit_support(&d, &res.support, lambda, &cfg).unwrap();
        assert!((obj - refit.objective.total).abs() <= 1e-6);
    }
}

#[test]
fn external_solution_check() {
    let cfg = FitConfig::default();
    let d = common::random_instance(50, 5, 4242);
    let constraint = SelectionConstraint::Cardinality(2.0);
    let res = solve(&d, constraint, 0.02, &cfg).unwrap();
    let mut z = vec![0.0; 5];
    for &j in &res.support {
        z[j] = 1.0;
    }
    let good = ExternalSolution { z: z.clone(), objective: res.objective };
    let check = check_external(&d, constraint, 0.02, &good, &res, 1e-4, &cfg).unwrap();
    assert!(check.feasible && check.agrees);

    // a claimed optimum well below our certified lower bound is rejected
    let low = ExternalSolution { z, objective: res.lower_bound - 1.0 };
    assert!(!check_external(&d, constraint, 0.02, &low, &res, 1e-4, &cfg).unwrap().agrees);

    let infeasible = ExternalSolution { z: vec![1.0; 5], objective: res.objective };
    assert!(!check_external(&d, constraint, 0.02, &infeasible, &res, 1e-4, &cfg).unwrap().feasible);

    let fractional = ExternalSolution { z: vec![0.5; 5], objective: res.objective };
    assert!(check_external(&d, constraint, 0.02, &fractional, &res, 1e-4, &cfg).is_err());
}
