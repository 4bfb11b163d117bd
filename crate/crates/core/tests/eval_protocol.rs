mod common;

use bestsubset::data::minmax_scale;
use bestsubset::datagen::{generate, ScenarioConfig};
use bestsubset::eval::{
    auc, bootstrap_eval, evaluate_split, nearest_rank, nested_cv, selection_stats, stratified_kfold, EvalConfig,
    Metric, Preprocess, Selector,
};
use bestsubset::logistic::{fit_support, predict_dataset};
use bestsubset::{Dataset, FeatureClass};
use common::random_instance;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn desk(replicates: usize) -> EvalConfig {
    EvalConfig {
        replicates,
        ..EvalConfig::default()
    }
}

/// Copy of `d` with every feature of `rows` replaced by a huge sentinel.
fn poison(d: &Dataset, rows: &[usize]) -> Dataset {
    let mut x = d.x().clone();
    for &i in rows {
        for j in 0..x.ncols() {
            x[(i, j)] = 1e6 * (1.0 + j as f64);
        }
    }
    Dataset::new(x, d.y().to_vec(), d.feature_names().to_vec()).unwrap()
}

#[test]
fn held_out_rows_never_influence_training() {
    let raw = generate(&ScenarioConfig::new(150, 10, 3, 0.0, 5)).unwrap();
    let folds = stratified_kfold(raw.y(), 3, 9).unwrap();
    let f = &folds[1];
    for pre in [Preprocess::MinMax, Preprocess::SplineMinMax] {
        let cfg = EvalConfig {
            preprocess: pre,
            ..desk(1)
        };
        for sel in [Selector::BnbCardinality { k: 3 }, Selector::GreedyTopk { k: 3 }] {
            let clean = evaluate_split(&raw, &f.train, &f.test, &sel, &cfg, 4).unwrap();
            let dirty = evaluate_split(&poison(&raw, &f.test), &f.train, &f.test, &sel, &cfg, 4).unwrap();
            assert_eq!(clean.lambda, dirty.lambda);
            assert_eq!(clean.validation, dirty.validation);
            assert_eq!(clean.support, dirty.support);
            assert_eq!(clean.params, dirty.params);

            // permuting test labels only moves the test metric
            let mut y = raw.y().to_vec();
            let t = &f.test;
            for w in 0..t.len() / 2 {
                y.swap(t[w], t[t.len() - 1 - w]);
            }
            let shuffled = evaluate_split(&raw.with_labels(y).unwrap(), &f.train, &f.test, &sel, &cfg, 4).unwrap();
            assert_eq!(clean.support, shuffled.support);
            assert_eq!(clean.params, shuffled.params);
        }
    }
}

#[test]
fn folds_partition_and_stratify() {
    let y: Vec<f64> = (0..97).map(|i| if i % 4 == 0 { 1.0 } else { -1.0 }).collect();
    let folds = stratified_kfold(&y, 3, 1).unwrap();
    let mut seen = vec![0; y.len()];
    let pos_total = y.iter().filter(|&&v| v > 0.0).count();
    let pos: Vec<usize> = folds
        .iter()
        .map(|f| f.test.iter().filter(|&&i| y[i] > 0.0).count())
        .collect();
    for f in &folds {
        for &i in &f.test {
            seen[i] += 1;
        }
        assert_eq!(f.train.len() + f.test.len(), y.len());
        let share = f.test.len() as f64 * pos_total as f64 / y.len() as f64;
        let p = f.test.iter().filter(|&&i| y[i] > 0.0).count() as f64;
        assert!((p - share).abs() <= 1.0 + 1e-9);
    }
    assert!(seen.iter().all(|&c| c == 1));
    assert!(pos.iter().max().unwrap() - pos.iter().min().unwrap() <= 1);
    assert_eq!(folds, stratified_kfold(&y, 3, 1).unwrap());
    assert_ne!(folds, stratified_kfold(&y, 3, 2).unwrap());
    assert!(stratified_kfold(&[1.0, 1.0, -1.0, -1.0, -1.0], 3, 0).is_err());
}

#[test]
fn single_lambda_without_selection_is_plain_cv() {
    let d = random_instance(90, 5, 21);
    let cfg = EvalConfig {
        lambda_grid: vec![0.02],
        preprocess: Preprocess::Identity,
        ..desk(1)
    };
    let cv = nested_cv(&d, &Selector::None, &cfg, 3).unwrap();
    assert_eq!(cv, nested_cv(&d, &Selector::None, &cfg, 3).unwrap());
    for f in &cv.folds {
        assert_eq!(f.lambda, 0.02);
        assert!(f.validation.is_empty());
        assert_eq!(f.support, vec![0, 1, 2, 3, 4]);
    }
    let total: f64 = cv.folds.iter().map(|f| f.test_metric).sum();
    assert!((total / 3.0 - cv.mean_metric).abs() < 1e-15);
}

#[test]
fn plain_cv_matches_manual_fits() {
    let d = random_instance(90, 4, 22);
    let cfg = EvalConfig {
        lambda_grid: vec![0.1],
        preprocess: Preprocess::Identity,
        ..desk(1)
    };
    let folds = stratified_kfold(d.y(), 3, 5).unwrap();
    for f in &folds {
        let out = evaluate_split(&d, &f.train, &f.test, &Selector::None, &cfg, 0).unwrap();
        let train = d.select_rows(&f.train);
        let test = d.select_rows(&f.test);
        let fit = fit_support(&train, &[0, 1, 2, 3], 0.1, &cfg.fit).unwrap();
        assert_eq!(out.params, fit.params);
        assert_eq!(out.test_metric, auc(&predict_dataset(&fit.params, &test), test.y()).unwrap());
    }
}

#[test]
fn one_replicate_gives_a_degenerate_interval() {
    let d = minmax_scale(&generate(&ScenarioConfig::new(82, 14, 3, 0.0, 2)).unwrap());
    let r = bootstrap_eval(&d, &Selector::GreedyTopk { k: 3 }, &desk(1)).unwrap();
    assert_eq!(r.bootstrap_count, 1);
    assert_eq!(r.ci_low, r.ci_high);
    assert_eq!(r.ci_low, r.replicates[0].test_metric);
    assert_eq!(r.mean_test_metric, r.replicates[0].test_metric);
}

#[test]
fn bootstrap_is_reproducible_across_pools() {
    let d = generate(&ScenarioConfig::new(82, 14, 3, 0.05, 6)).unwrap();
    let cfg = EvalConfig {
        seed: 17,
        ..desk(6)
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bootstrap_eval(&d, &Selector::BnbCardinality { k: 3 }, &cfg).unwrap())
    };
    let a = run(1);
    assert_eq!(a, run(3));
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&run(8)).unwrap());
    let fr = a.selection.fractions.unwrap();
    for v in [fr.informative, fr.redundant, fr.uninformative] {
        assert!((0.0..=1.0).contains(&v));
    }
    assert!(a.ci_low <= a.ci_high);
}

#[test]
fn accuracy_metric_flows_to_the_report() {
    let d = generate(&ScenarioConfig::new(82, 6, 2, 0.0, 3)).unwrap();
    let cfg = EvalConfig {
        metric: Metric::Accuracy,
        preprocess: Preprocess::SplineMinMax,
        ..desk(2)
    };
    let r = bootstrap_eval(&d, &Selector::BnbCardinality { k: 4 }, &cfg).unwrap();
    assert_eq!(r.metric, Metric::Accuracy);
    assert_eq!(r.feature_names.len(), 6);
    assert!(r.replicates.iter().all(|x| x.support.iter().all(|&j| j < 6)));
}

#[test]
fn selection_stats_by_hand() {
    let classes = [
        FeatureClass::Informative,
        FeatureClass::Informative,
        FeatureClass::Redundant,
        FeatureClass::Uninformative,
    ];
    let supports = vec![vec![0, 1], vec![1, 0], vec![0, 3]];
    let s = selection_stats(&supports, 4, Some(&classes)).unwrap();
    assert_eq!(s.stability.modal_support, vec![0, 1]);
    assert!((s.stability.modal_frequency - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(s.stability.feature_frequency, vec![1.0, 2.0 / 3.0, 0.0, 1.0 / 3.0]);
    let f = s.fractions.unwrap();
    assert!((f.informative - (1.0 + 1.0 + 0.5) / 3.0).abs() < 1e-15);
    assert_eq!(f.redundant, 0.0);
    assert!((f.uninformative - 1.0 / 3.0).abs() < 1e-15);
    let (lo, hi) = s.fractions_ci.unwrap();
    assert_eq!((lo.informative, hi.informative), (0.5, 1.0));

    let same = selection_stats(&[vec![2], vec![2]], 4, None).unwrap();
    assert_eq!(same.stability.modal_frequency, 1.0);
    assert!(same.fractions.is_none());
    let disjoint = selection_stats(&[vec![0], vec![1], vec![2], vec![3]], 4, None).unwrap();
    assert_eq!(disjoint.stability.modal_frequency, 0.25);
}

#[test]
fn nearest_rank_convention() {
    let v: Vec<f64> = (1..=399).map(f64::from).collect();
    assert_eq!(nearest_rank(&v, 0.025), 10.0);
    assert_eq!(nearest_rank(&v, 0.975), 390.0);
    let w: Vec<f64> = (1..=49).map(f64::from).collect();
    assert_eq!(nearest_rank(&w, 0.025), 2.0);
    assert_eq!(nearest_rank(&w, 0.975), 48.0);
}

#[test]
fn larger_lambda_wins_validation_ties() {
    // a constant feature makes every lambda score the same
    let y: Vec<f64> = (0..30).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
    let d = Dataset::from_matrix(DMatrix::from_element(30, 1, 1.0), y).unwrap();
    let folds = stratified_kfold(d.y(), 3, 0).unwrap();
    let out = evaluate_split(&d, &folds[0].train, &folds[0].test, &Selector::None, &desk(1), 1).unwrap();
    assert_eq!(out.lambda, 0.1);
}

proptest! {
    #[test]
    fn auc_is_rank_invariant(scores in proptest::collection::vec(-5.0f64..5.0, 6..40), seed in 0u64..1000) {
        let labels: Vec<f64> = (0..scores.len()).map(|i| if (i as u64 + seed) % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let a = auc(&scores, &labels).unwrap();
        let b = auc(&scores.iter().map(|s| s.exp() * 3.0 + 1.0).collect::<Vec<_>>(), &labels).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        let flipped: Vec<f64> = labels.iter().map(|l| -l).collect();
        prop_assert!((auc(&scores, &flipped).unwrap() - (1.0 - a)).abs() < 1e-12);
    }
}
