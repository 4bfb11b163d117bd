//! Cardinality and budget experiment suites over the eight-scenario grid.
//!
//! Each run compares an exact selector with its greedy counterpart on the
//! same bootstrap resamples. Jobs and replicates run on a rayon pool and are
//! merged by index, so every output is identical for any worker count.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{epv, Dataset, FitConfig};
use crate::datagen::{generate, sample_costs, scenario_grid_seeded, ScenarioConfig};
use crate::error::{Error, Result};
use crate::eval::{
    bootstrap_eval, nearest_rank, ClassFractions, EvalConfig, EvalReport, Metric, Preprocess, Selector,
    DESK_REPLICATES, LAMBDA_GRID, FULL_REPLICATES,
};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Cardinality,
    Budget,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Cardinality => "cardinality",
            Suite::Budget => "budget",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Full,
}

impl Scale {
    pub fn replicates(self) -> usize {
        match self {
            Scale::Desk => DESK_REPLICATES,
            Scale::Full => FULL_REPLICATES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub scale: Scale,
    /// Overrides the replicate count implied by `scale`.
    pub replicates: Option<usize>,
    pub seed: u64,
    /// Indices into the scenario grid.
    pub scenarios: Vec<usize>,
    /// Informative-feature counts of the cardinality runs; `k` matches each.
    pub cardinality_runs: Vec<usize>,
    /// Number of cost draws in the budget suite.
    pub budget_runs: usize,
    pub budget: f64,
    pub lambda_grid: Vec<f64>,
    pub fit: FitConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            suite: Suite::Cardinality,
            scale: Scale::Desk,
            replicates: None,
            seed: 0,
            scenarios: (0..8).collect(),
            cardinality_runs: vec![2, 3, 4, 5],
            budget_runs: 5,
            budget: 10.0,
            lambda_grid: LAMBDA_GRID.to_vec(),
            fit: FitConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn for_suite(suite: Suite, scale: Scale) -> Self {
        Self {
            suite,
            scale,
            ..Self::default()
        }
    }

    pub fn replicate_count(&self) -> usize {
        self.replicates.unwrap_or_else(|| self.scale.replicates())
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(&s) = self.scenarios.iter().find(|&&s| s >= 8) {
            return Err(Error::InvalidConfig(format!("scenario index {s} out of range 0..8")));
        }
        if self.scenarios.is_empty() {
            return Err(Error::InvalidConfig("no scenarios selected".into()));
        }
        match self.suite {
            Suite::Cardinality if self.cardinality_runs.is_empty() => {
                return Err(Error::InvalidConfig("no cardinality runs".into()))
            }
            Suite::Budget if self.budget_runs == 0 => return Err(Error::InvalidConfig("no budget runs".into())),
            _ => {}
        }
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            return Err(Error::InvalidConfig(format!("budget must be positive, got {}", self.budget)));
        }
        self.eval_config(0).validate()
    }

    fn eval_config(&self, seed: u64) -> EvalConfig {
        EvalConfig {
            lambda_grid: self.lambda_grid.clone(),
            metric: Metric::Auc,
            preprocess: Preprocess::MinMax,
            replicates: self.replicate_count(),
            seed,
            fit: self.fit.clone(),
            ..EvalConfig::default()
        }
    }

    /// Every (scenario, run) pair of the suite in output order.
    pub fn runs(&self) -> Vec<RunSpec> {
        let grid = scenario_grid_seeded(self.seed);
        let mut out = Vec::new();
        for &s in &self.scenarios {
            match self.suite {
                Suite::Cardinality => {
                    for (r, &k) in self.cardinality_runs.iter().enumerate() {
                        let mut data = grid[s].clone();
                        data.n_informative = k;
                        data.seed = derive_seed(grid[s].seed, &[r as u64]);
                        out.push(RunSpec {
                            scenario: s,
                            run: r,
                            data,
                            cost_seed: None,
                            optimal: Selector::BnbCardinality { k },
                            greedy: Selector::GreedyTopk { k },
                            eval_seed: derive_seed(self.seed, &[1, s as u64, r as u64]),
                        });
                    }
                }
                Suite::Budget => {
                    for r in 0..self.budget_runs {
                        out.push(RunSpec {
                            scenario: s,
                            run: r,
                            data: grid[s].clone(),
                            cost_seed: Some(derive_seed(self.seed, &[2, s as u64, r as u64])),
                            optimal: Selector::BnbBudget { budget: self.budget },
                            greedy: Selector::GreedyBudget { budget: self.budget },
                            eval_seed: derive_seed(self.seed, &[3, s as u64, r as u64]),
                        });
                    }
                }
            }
        }
        out
    }
}

/// One run of a suite: a dataset and the two selectors compared on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub scenario: usize,
    pub run: usize,
    pub data: ScenarioConfig,
    /// Seed of the per-feature costs (budget suite only).
    pub cost_seed: Option<u64>,
    pub optimal: Selector,
    pub greedy: Selector,
    /// Bootstrap seed shared by both selectors.
    pub eval_seed: u64,
}

impl RunSpec {
    pub fn dataset(&self) -> Result<Dataset> {
        let d = generate(&self.data)?;
        match self.cost_seed {
            Some(seed) => d.clone().with_costs(sample_costs(d.n_features(), seed)),
            None => Ok(d),
        }
    }

    pub fn label(&self) -> String {
        format!("s{}_r{}", self.scenario, self.run)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Optimal,
    Greedy,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Optimal => "optimal",
            Role::Greedy => "greedy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub spec: RunSpec,
    /// Minority count over feature count of the generated dataset.
    pub epv: f64,
    pub optimal: EvalReport,
    pub greedy: EvalReport,
}

impl RunResult {
    pub fn report(&self, role: Role) -> &EvalReport {
        match role {
            Role::Optimal => &self.optimal,
            Role::Greedy => &self.greedy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub runs: Vec<RunResult>,
}

/// Runs the suite on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let specs = cfg.runs();
    let datasets = specs.iter().map(|s| s.dataset()).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, Role)> = (0..specs.len())
        .flat_map(|i| [(i, Role::Optimal), (i, Role::Greedy)])
        .collect();
    let reports = jobs
        .par_iter()
        .map(|&(i, role)| {
            let spec = &specs[i];
            let selector = match role {
                Role::Optimal => spec.optimal,
                Role::Greedy => spec.greedy,
            };
            bootstrap_eval(&datasets[i], &selector, &cfg.eval_config(spec.eval_seed))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut reports = reports.into_iter();
    let runs = specs
        .into_iter()
        .zip(&datasets)
        .map(|(spec, d)| {
            Ok(RunResult {
                spec,
                epv: epv(d)?,
                optimal: reports.next().expect("optimal report"),
                greedy: reports.next().expect("greedy report"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        config: cfg.clone(),
        runs,
    })
}

/// Runs the suite on a dedicated pool of `workers` threads.
pub fn run_experiment_with_workers(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

/// Mean and nearest-rank 95% interval of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn of(values: &[f64]) -> Interval {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Interval {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            low: nearest_rank(&v, 0.025),
            high: nearest_rank(&v, 0.975),
        }
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.low <= other.high && other.low <= self.high
    }
}

/// Replicate-level values of one selector pooled over the runs of a
/// scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioAggregate {
    pub scenario: usize,
    pub m_examples: usize,
    pub n_features: usize,
    pub label_noise: f64,
    pub nominal_epv: f64,
    pub role: Role,
    pub replicates: usize,
    pub metric: Interval,
    pub informative: Interval,
    pub redundant: Interval,
    pub uninformative: Interval,
    /// Mean over runs of the modal-support frequency.
    pub stability: f64,
}

fn replicate_fractions(r: &RunResult, role: Role) -> Vec<ClassFractions> {
    let report = r.report(role);
    let d = r.spec.dataset().expect("dataset regenerated from a validated spec");
    let classes = d.feature_class().expect("synthetic datasets are tagged");
    report
        .replicates
        .iter()
        .map(|rep| rep.fractions(classes))
        .collect()
}

impl ExperimentResult {
    /// Pooled statistics per scenario and role, in scenario order.
    pub fn aggregates(&self) -> Vec<ScenarioAggregate> {
        let mut out = Vec::new();
        for &s in &self.config.scenarios {
            let runs: Vec<&RunResult> = self.runs.iter().filter(|r| r.spec.scenario == s).collect();
            let data = &runs[0].spec.data;
            for role in [Role::Optimal, Role::Greedy] {
                let mut metric = Vec::new();
                let mut fr = Vec::new();
                let mut stab = 0.0;
                for r in &runs {
                    let rep = r.report(role);
                    metric.extend(rep.replicates.iter().map(|x| x.test_metric));
                    fr.extend(replicate_fractions(r, role));
                    stab += rep.selection.stability.modal_frequency / runs.len() as f64;
                }
                let pick = |f: fn(&ClassFractions) -> f64| Interval::of(&fr.iter().map(f).collect::<Vec<_>>());
                out.push(ScenarioAggregate {
                    scenario: s,
                    m_examples: data.m_examples,
                    n_features: data.n_features,
                    label_noise: data.label_noise,
                    nominal_epv: data.nominal_epv(),
                    role,
                    replicates: metric.len(),
                    metric: Interval::of(&metric),
                    informative: pick(|c| c.informative),
                    redundant: pick(|c| c.redundant),
                    uninformative: pick(|c| c.uninformative),
                    stability: stab,
                });
            }
        }
        out
    }

    pub fn aggregate(&self, scenario: usize, role: Role) -> Option<ScenarioAggregate> {
        self.aggregates()
            .into_iter()
            .find(|a| a.scenario == scenario && a.role == role)
    }

    /// One row per run and role.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "suite",
            "scenario",
            "m",
            "n",
            "noise",
            "epv",
            "run",
            "n_informative",
            "selector",
            "role",
            "replicates",
            "mean_auc",
            "ci_low",
            "ci_high",
            "informative",
            "informative_low",
            "informative_high",
            "redundant",
            "redundant_low",
            "redundant_high",
            "uninformative",
            "uninformative_low",
            "uninformative_high",
            "modal_frequency",
            "uncertified_solves",
            "redraws",
        ])?;
        for r in &self.runs {
            for role in [Role::Optimal, Role::Greedy] {
                let rep = r.report(role);
                let f = rep.selection.fractions.expect("tagged");
                let (lo, hi) = rep.selection.fractions_ci.expect("tagged");
                let sel = match rep.selector {
                    Selector::BnbCardinality { k } | Selector::GreedyTopk { k } => format!("{}:k={k}", rep.selector.name()),
                    Selector::BnbBudget { budget } | Selector::GreedyBudget { budget } => {
                        format!("{}:b={budget}", rep.selector.name())
                    }
                    Selector::None => rep.selector.name().to_string(),
                };
                let mut row = vec![
                    self.config.suite.name().to_string(),
                    r.spec.scenario.to_string(),
                    r.spec.data.m_examples.to_string(),
                    r.spec.data.n_features.to_string(),
                    r.spec.data.label_noise.to_string(),
                    format!("{:.2}", r.spec.data.nominal_epv()),
                    r.spec.run.to_string(),
                    r.spec.data.n_informative.to_string(),
                    sel,
                    role.name().to_string(),
                    rep.bootstrap_count.to_string(),
                    rep.mean_test_metric.to_string(),
                    rep.ci_low.to_string(),
                    rep.ci_high.to_string(),
                ];
                for (m, l, h) in [
                    (f.informative, lo.informative, hi.informative),
                    (f.redundant, lo.redundant, hi.redundant),
                    (f.uninformative, lo.uninformative, hi.uninformative),
                ] {
                    row.extend([m.to_string(), l.to_string(), h.to_string()]);
                }
                row.push(rep.selection.stability.modal_frequency.to_string());
                row.push(rep.replicates.iter().map(|x| x.uncertified_solves).sum::<usize>().to_string());
                row.push(rep.replicates.iter().map(|x| x.attempts - 1).sum::<usize>().to_string());
                w.write_record(&row)?;
            }
        }
        w.flush().map_err(|e| Error::io("<summary csv>", e))?;
        Ok(())
    }

    pub fn summary_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_summary_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii csv")
    }

    /// Pooled per-scenario table, the numbers behind the summary figures.
    pub fn write_aggregate_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "suite",
            "scenario",
            "m",
            "n",
            "noise",
            "epv",
            "role",
            "replicates",
            "mean_auc",
            "auc_low",
            "auc_high",
            "informative",
            "informative_low",
            "informative_high",
            "redundant",
            "redundant_low",
            "redundant_high",
            "uninformative",
            "uninformative_low",
            "uninformative_high",
            "stability",
        ])?;
        for a in self.aggregates() {
            let mut row = vec![
                self.config.suite.name().to_string(),
                a.scenario.to_string(),
                a.m_examples.to_string(),
                a.n_features.to_string(),
                a.label_noise.to_string(),
                format!("{:.2}", a.nominal_epv),
                a.role.name().to_string(),
                a.replicates.to_string(),
            ];
            for i in [a.metric, a.informative, a.redundant, a.uninformative] {
                row.extend([i.mean.to_string(), i.low.to_string(), i.high.to_string()]);
            }
            row.push(a.stability.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<aggregate csv>", e))?;
        Ok(())
    }

    /// Writes `summary.csv`, `scenarios.csv` and per-report JSON and
    /// replicate CSVs under `dir/reports`.
    pub fn write_outputs(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let reports = dir.join("reports");
        fs::create_dir_all(&reports).map_err(|e| Error::io(&reports, e))?;
        let create = |p: &Path| fs::File::create(p).map_err(|e| Error::io(p, e));
        self.write_summary_csv(create(&dir.join("summary.csv"))?)?;
        self.write_aggregate_csv(create(&dir.join("scenarios.csv"))?)?;
        for r in &self.runs {
            let classes = r.spec.dataset()?.feature_class().map(|c| c.to_vec());
            for role in [Role::Optimal, Role::Greedy] {
                let stem = format!("{}_{}_{}", self.config.suite.name(), r.spec.label(), role.name());
                let rep = r.report(role);
                rep.write_json(reports.join(format!("{stem}.json")))?;
                rep.write_replicates_csv(create(&reports.join(format!("{stem}_replicates.csv")))?, classes.as_deref())?;
            }
        }
        let cfg = serde_json::to_string_pretty(&self.config)?;
        let path = dir.join("config.json");
        fs::write(&path, cfg + "\n").map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_counts() {
        let card = ExperimentConfig::for_suite(Suite::Cardinality, Scale::Desk);
        assert_eq!(card.runs().len(), 32);
        assert_eq!(card.replicate_count(), 49);
        let budget = ExperimentConfig::for_suite(Suite::Budget, Scale::Full);
        let runs = budget.runs();
        assert_eq!(runs.len(), 40);
        assert_eq!(budget.replicate_count(), 399);
        assert!(runs.iter().all(|r| r.data.n_informative == 5 && r.optimal == Selector::BnbBudget { budget: 10.0 }));
        let seeds: std::collections::HashSet<u64> = runs.iter().map(|r| r.cost_seed.unwrap()).collect();
        assert_eq!(seeds.len(), 40);
    }

    #[test]
    fn cardinality_matches_informative_count() {
        for r in ExperimentConfig::default().runs() {
            assert_eq!(r.optimal, Selector::BnbCardinality { k: r.data.n_informative });
            assert_eq!(r.greedy, Selector::GreedyTopk { k: r.data.n_informative });
        }
    }

    #[test]
    fn interval_overlap() {
        let a = Interval { mean: 0.5, low: 0.4, high: 0.6 };
        let b = Interval { mean: 0.7, low: 0.6, high: 0.8 };
        let c = Interval { mean: 0.9, low: 0.85, high: 0.95 };
        assert!(a.overlaps(&b) && b.overlaps(&a));
        assert!(!a.overlaps(&c));
    }

    #[test]
    fn tiny_suite_is_worker_independent() {
        let cfg = ExperimentConfig {
            scenarios: vec![1],
            cardinality_runs: vec![2],
            replicates: Some(3),
            ..ExperimentConfig::default()
        };
        let one = run_experiment_with_workers(&cfg, 1).unwrap().summary_csv();
        let three = run_experiment_with_workers(&cfg, 3).unwrap().summary_csv();
        assert_eq!(one, three);
        assert_eq!(one.lines().count(), 3);
    }
}
