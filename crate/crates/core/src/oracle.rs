//! Cross-oracle self-checks: the exact solver against enumeration, analytic
//! gradients against finite differences, and CBF serialization round trips.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::exhaustive_best_subset;
use crate::bnb::solve;
use crate::conic::{build_program, witness, ConicProgram};
use crate::data::{minmax_scale, Dataset, FitConfig, SelectionConstraint};
use crate::error::{Error, Result};
use crate::logistic::{gradient, objective, ModelParams};
use crate::rng::{derive_seed, rng_from};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    /// Random instances per check.
    pub instances: usize,
    /// Largest feature count handed to exhaustive enumeration.
    pub max_n: usize,
    pub seed: u64,
    pub fit: FitConfig,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            instances: 200,
            max_n: 12,
            seed: 0,
            fit: FitConfig {
                rel_gap_tol: 1e-9,
                abs_gap_tol: 1e-9,
                newton_tol: 1e-10,
                ..FitConfig::default()
            },
        }
    }
}

/// Outcome of one check over all its instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub instances: usize,
    pub failures: usize,
    /// Largest discrepancy seen, in the check's own units.
    pub worst: f64,
    pub tolerance: f64,
    /// Description of the first failing instance.
    pub first_failure: Option<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.instances > 0
    }
}

/// A random instance drawn by [`random_instance`].
#[derive(Debug, Clone)]
pub struct Instance {
    pub dataset: Dataset,
    pub constraint: SelectionConstraint,
    pub lambda: f64,
}

/// Gaussian features with a sparse logistic ground truth, min-max scaled.
/// Half of the instances carry integer costs and a budget constraint.
pub fn random_instance(seed: u64, max_n: usize) -> Instance {
    let mut rng = rng_from(seed);
    let n = rng.random_range(2..=max_n.max(2));
    let m = rng.random_range(30..=90);
    let dataset = loop {
        let x = DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
        let truth: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.4) { rng.random_range(-3.0..3.0) } else { 0.0 })
            .collect();
        let y: Vec<f64> = (0..m)
            .map(|i| {
                let z: f64 = (0..n).map(|j| x[(i, j)] * truth[j]).sum();
                if rng.random::<f64>() < 1.0 / (1.0 + (-z).exp()) {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        let pos = y.iter().filter(|&&v| v > 0.0).count();
        if pos >= 3 && pos + 3 <= m {
            break minmax_scale(&Dataset::from_matrix(x, y).expect("valid shape"));
        }
    };
    let lambda = [0.1, 0.02, 0.004][rng.random_range(0..3)];
    if rng.random_bool(0.5) {
        let k = rng.random_range(1..=n);
        Instance {
            dataset,
            constraint: SelectionConstraint::Cardinality(k as f64),
            lambda,
        }
    } else {
        let costs: Vec<f64> = (0..n).map(|_| rng.random_range(1..=10u32) as f64).collect();
        let budget = rng.random_range(1..=(costs.iter().sum::<f64>() as u32)) as f64;
        Instance {
            dataset: dataset.with_costs(costs).expect("one cost per feature"),
            constraint: SelectionConstraint::Budget(budget),
            lambda,
        }
    }
}

fn accumulate(name: &str, tolerance: f64, results: Vec<Result<(f64, String)>>) -> Result<CheckReport> {
    let mut report = CheckReport {
        name: name.into(),
        instances: results.len(),
        failures: 0,
        worst: 0.0,
        tolerance,
        first_failure: None,
    };
    for r in results {
        let (err, what) = r?;
        report.worst = report.worst.max(err);
        if !(err <= tolerance) {
            report.failures += 1;
            report.first_failure.get_or_insert(what);
        }
    }
    Ok(report)
}

fn instance_seeds(cfg: &OracleConfig, check: u64) -> Vec<u64> {
    (0..cfg.instances as u64).map(|i| derive_seed(cfg.seed, &[check, i])).collect()
}

/// Relative objective difference between the exact solver and enumeration.
pub fn check_bnb_vs_exhaustive(cfg: &OracleConfig) -> Result<CheckReport> {
    let results = instance_seeds(cfg, 0)
        .into_par_iter()
        .map(|seed| {
            let inst = random_instance(seed, cfg.max_n);
            let ours = solve(&inst.dataset, inst.constraint, inst.lambda, &cfg.fit)?;
            let reference = exhaustive_best_subset(&inst.dataset, inst.constraint, inst.lambda, &cfg.fit)?;
            let scale = reference.objective.abs().max(1.0);
            let mut err = (ours.objective - reference.objective).abs() / scale;
            if !ours.status.is_certified() || !inst.constraint.admits(&inst.dataset, &ours.support)? {
                err = f64::INFINITY;
            }
            let what = format!(
                "seed {seed}: {:?} lambda {} gives {:.10} on {:?}, enumeration {:.10} on {:?}",
                inst.constraint, inst.lambda, ours.objective, ours.support, reference.objective, reference.support
            );
            Ok((err, what))
        })
        .collect();
    accumulate("bnb vs exhaustive", 1e-7, results)
}

/// Cardinality `k` and budget `k` with unit costs must agree exactly.
pub fn check_cardinality_as_budget(cfg: &OracleConfig) -> Result<CheckReport> {
    let results = instance_seeds(cfg, 1)
        .into_par_iter()
        .map(|seed| {
            let inst = random_instance(seed, cfg.max_n);
            let n = inst.dataset.n_features();
            let k = (seed % n as u64 + 1) as f64;
            let card = solve(&inst.dataset, SelectionConstraint::Cardinality(k), inst.lambda, &cfg.fit)?;
            let unit = inst.dataset.clone().with_costs(vec![1.0; n])?;
            let budget = solve(&unit, SelectionConstraint::Budget(k), inst.lambda, &cfg.fit)?;
            let same = card.support == budget.support && card.objective.to_bits() == budget.objective.to_bits();
            let err = if same { 0.0 } else { 1.0 };
            let what = format!("seed {seed}: k {k} gives {:?} vs {:?}", card.support, budget.support);
            Ok((err, what))
        })
        .collect();
    accumulate("cardinality equals unit budget", 0.0, results)
}

/// Central differences of the objective against the analytic gradient.
pub fn check_gradient(cfg: &OracleConfig) -> Result<CheckReport> {
    let results = instance_seeds(cfg, 2)
        .into_par_iter()
        .map(|seed| {
            let inst = random_instance(seed, cfg.max_n);
            let d = &inst.dataset;
            let mut rng = rng_from(derive_seed(seed, &[1]));
            let p = ModelParams {
                theta: (0..d.n_features()).map(|_| rng.random_range(-2.0..2.0)).collect(),
                theta0: rng.random_range(-1.0..1.0),
            };
            let (g, g0) = gradient(d, &p, inst.lambda)?;
            let f = |q: &ModelParams| objective(d, q, inst.lambda).map(|o| o.total);
            let h = 1e-6;
            let mut worst: f64 = 0.0;
            for j in 0..=d.n_features() {
                let (mut plus, mut minus) = (p.clone(), p.clone());
                let analytic = if j < d.n_features() {
                    plus.theta[j] += h;
                    minus.theta[j] -= h;
                    g[j]
                } else {
                    plus.theta0 += h;
                    minus.theta0 -= h;
                    g0
                };
                let numeric = (f(&plus)? - f(&minus)?) / (2.0 * h);
                worst = worst.max((numeric - analytic).abs() / analytic.abs().max(1.0));
            }
            Ok((worst, format!("seed {seed}: relative error {worst:e}")))
        })
        .collect();
    accumulate("gradient vs finite differences", 1e-6, results)
}

/// Export, parse and re-export of the conic program must be lossless, and
/// the solver's solution must map to a feasible point with equal objective.
pub fn check_cbf_round_trip(cfg: &OracleConfig) -> Result<CheckReport> {
    let results = instance_seeds(cfg, 3)
        .into_par_iter()
        .map(|seed| {
            let inst = random_instance(seed, cfg.max_n.min(8));
            let program = build_program(&inst.dataset, inst.constraint, inst.lambda)?;
            let text = program.to_cbf();
            let parsed = ConicProgram::from_cbf(&text)?;
            if parsed != program || parsed.to_cbf() != text {
                return Ok((f64::INFINITY, format!("seed {seed}: round trip changed the program")));
            }
            let sol = solve(&inst.dataset, inst.constraint, inst.lambda, &cfg.fit)?;
            let x = witness(&inst.dataset, &sol.params, &sol.support)?;
            let violation = parsed.max_violation(&x)?;
            let gap = (parsed.objective_value(&x) - sol.objective).abs() / sol.objective.abs().max(1.0);
            Ok((violation.max(gap), format!("seed {seed}: violation {violation:e}, objective gap {gap:e}")))
        })
        .collect();
    accumulate("CBF round trip and witness", 1e-9, results)
}

/// Runs every check in a fixed order.
pub fn run_battery(cfg: &OracleConfig) -> Result<Vec<CheckReport>> {
    if cfg.max_n > crate::baselines::EXHAUSTIVE_MAX_FEATURES {
        return Err(Error::TooLarge {
            n: cfg.max_n,
            max: crate::baselines::EXHAUSTIVE_MAX_FEATURES,
        });
    }
    Ok(vec![
        check_bnb_vs_exhaustive(cfg)?,
        check_cardinality_as_budget(cfg)?,
        check_gradient(cfg)?,
        check_cbf_round_trip(cfg)?,
    ])
}
