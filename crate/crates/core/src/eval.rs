//! Evaluation protocol: AUC and accuracy, stratified folds, nested
//! cross-validation with ridge-weight tuning, and bootstrap confidence
//! intervals with selection statistics.
//!
//! Everything learned from data (scaling, spline knots, the selected support,
//! the ridge weight and the coefficients) is fitted on training rows only.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{greedy_budget, greedy_topk};
use crate::bnb::{solve, SolveStatus};
use crate::data::{Dataset, FeatureClass, FitConfig, MinMaxScaler, SelectionConstraint, SplineTransform};
use crate::error::{Error, Result};
use crate::logistic::{fit_support, predict_dataset, ModelParams};
use crate::rng::{derive_seed, rng_from};

/// Ridge weights tried by the inner loop.
pub const LAMBDA_GRID: [f64; 3] = [0.1, 0.02, 0.004];
pub const FULL_REPLICATES: usize = 399;
pub const DESK_REPLICATES: usize = 49;

/// Area under the ROC curve in Mann-Whitney form, ties counting one half.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidData("NaN score".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of midranks of positives
    let (mut rank_sum, mut n_pos) = (0.0, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k] > 0.0 {
                rank_sum += mid;
                n_pos += 1;
            }
        }
        i = j + 1;
    }
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Fraction of labels matched by predicting `+1` when `p >= 0.5`.
pub fn accuracy_at_half(probs: &[f64], labels: &[f64]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: probs.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::InvalidData("no examples".into()));
    }
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| (p >= 0.5) == (y > 0.0))
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Auc,
    Accuracy,
}

impl Metric {
    pub fn score(self, probs: &[f64], labels: &[f64]) -> Result<f64> {
        match self {
            Metric::Auc => auc(probs, labels),
            Metric::Accuracy => accuracy_at_half(probs, labels),
        }
    }
}

/// Row indices of one train/test split, both sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified `k`-fold partition: each class is shuffled and dealt round
/// robin, so per-fold class counts differ by at most one.
pub fn stratified_kfold(labels: &[f64], folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {folds}")));
    }
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] > 0.0).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] <= 0.0).collect();
    let minority = pos.len().min(neg.len());
    if minority < folds {
        return Err(Error::FoldTooSmall { minority, folds });
    }
    let mut rng = rng_from(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut assign = vec![0usize; labels.len()];
    for (slot, &i) in pos.iter().chain(&neg).enumerate() {
        assign[i] = slot % folds;
    }
    Ok((0..folds)
        .map(|f| {
            let (test, train) = (0..labels.len()).partition(|&i| assign[i] == f);
            Fold { train, test }
        })
        .collect())
}

/// Feature selection strategy evaluated by the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Selector {
    BnbCardinality { k: usize },
    BnbBudget { budget: f64 },
    GreedyTopk { k: usize },
    GreedyBudget { budget: f64 },
    /// Ridge fit on all features.
    None,
}

/// A fitted model and the support it uses.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedModel {
    pub params: ModelParams,
    pub support: Vec<usize>,
    /// Solver status for exact selectors.
    pub status: Option<SolveStatus>,
}

impl Selector {
    pub fn name(&self) -> &'static str {
        match self {
            Selector::BnbCardinality { .. } => "bnb-cardinality",
            Selector::BnbBudget { .. } => "bnb-budget",
            Selector::GreedyTopk { .. } => "greedy-topk",
            Selector::GreedyBudget { .. } => "greedy-budget",
            Selector::None => "none",
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Selector::BnbCardinality { .. } | Selector::BnbBudget { .. })
    }

    /// Selects features on `d` and fits the final ridge model at `lambda`.
    pub fn fit(&self, d: &Dataset, lambda: f64, cfg: &FitConfig) -> Result<SelectedModel> {
        let exact = |constraint| -> Result<SelectedModel> {
            let r = solve(d, constraint, lambda, cfg)?;
            Ok(SelectedModel {
                params: r.params,
                support: r.support,
                status: Some(r.status),
            })
        };
        let refit = |support: Vec<usize>| -> Result<SelectedModel> {
            let fit = fit_support(d, &support, lambda, cfg)?;
            Ok(SelectedModel {
                params: fit.params,
                support,
                status: None,
            })
        };
        match *self {
            Selector::BnbCardinality { k } => exact(SelectionConstraint::Cardinality(k as f64)),
            Selector::BnbBudget { budget } => exact(SelectionConstraint::Budget(budget)),
            Selector::GreedyTopk { k } => refit(greedy_topk(d, k.min(d.n_features()))?),
            Selector::GreedyBudget { budget } => refit(greedy_budget(d, budget)?),
            Selector::None => refit((0..d.n_features()).collect()),
        }
    }
}

/// Feature transform fitted on training rows and applied to held-out rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preprocess {
    /// Use features as given.
    Identity,
    MinMax,
    /// Cubic spline expansion followed by min-max scaling.
    SplineMinMax,
}

enum Fitted {
    Identity,
    MinMax(MinMaxScaler),
    Spline(SplineTransform, MinMaxScaler),
}

impl Preprocess {
    fn fit(self, train: &Dataset) -> Result<Fitted> {
        Ok(match self {
            Preprocess::Identity => Fitted::Identity,
            Preprocess::MinMax => Fitted::MinMax(MinMaxScaler::fit(train)),
            Preprocess::SplineMinMax => {
                let spline = SplineTransform::fit(train);
                let expanded = spline.transform(train)?;
                Fitted::Spline(spline, MinMaxScaler::fit(&expanded))
            }
        })
    }
}

impl Fitted {
    /// Input feature behind each output column.
    fn sources(&self, n_inputs: usize) -> Vec<usize> {
        match self {
            Fitted::Spline(sp, _) => sp
                .knots
                .iter()
                .enumerate()
                .flat_map(|(j, k)| std::iter::repeat_n(j, if k.is_some() { 4 } else { 1 }))
                .collect(),
            _ => (0..n_inputs).collect(),
        }
    }

    fn apply(&self, d: &Dataset) -> Result<Dataset> {
        match self {
            Fitted::Identity => Ok(d.clone()),
            Fitted::MinMax(s) => s.transform(d),
            Fitted::Spline(sp, s) => s.transform(&sp.transform(d)?),
        }
    }
}

/// Settings of the nested cross-validation and bootstrap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    /// Metric on outer test folds; validation folds always use AUC.
    pub metric: Metric,
    pub preprocess: Preprocess,
    pub replicates: usize,
    /// Redraws allowed per replicate when a resample cannot be stratified.
    pub max_redraws: usize,
    pub seed: u64,
    pub fit: FitConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            lambda_grid: LAMBDA_GRID.to_vec(),
            folds: 3,
            metric: Metric::Auc,
            preprocess: Preprocess::MinMax,
            replicates: FULL_REPLICATES,
            max_redraws: 20,
            seed: 0,
            fit: FitConfig::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() {
            return Err(Error::InvalidConfig("lambda grid is empty".into()));
        }
        if let Some(l) = self.lambda_grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig(format!("invalid lambda {l}")));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig("need at least 2 folds".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("need at least one bootstrap replicate".into()));
        }
        self.fit.validate()
    }

    /// Grid sorted by decreasing lambda, so ties resolve to more regularization.
    fn grid_desc(&self) -> Vec<f64> {
        let mut g = self.lambda_grid.clone();
        g.sort_by(|a, b| b.total_cmp(a));
        g.dedup();
        g
    }
}

/// Result of evaluating one outer split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub lambda: f64,
    /// Mean validation AUC per grid value, in decreasing lambda order.
    pub validation: Vec<(f64, f64)>,
    pub test_metric: f64,
    /// Selected columns of the preprocessed training data.
    pub support: Vec<usize>,
    /// Input features behind `support`; differs from it only when the
    /// preprocessing expands features.
    pub source_support: Vec<usize>,
    pub status: Option<SolveStatus>,
    pub params: ModelParams,
}

/// Outcome of a full nested cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub mean_metric: f64,
    pub folds: Vec<SplitOutcome>,
}

impl CvOutcome {
    /// Union of the input features chosen in the outer folds.
    pub fn union_support(&self) -> Vec<usize> {
        let mut u: Vec<usize> = self.folds.iter().flat_map(|f| f.source_support.iter().copied()).collect();
        u.sort_unstable();
        u.dedup();
        u
    }
}

fn fit_and_score(
    train: &Dataset,
    test: &Dataset,
    selector: &Selector,
    lambda: f64,
    metric: Metric,
    cfg: &EvalConfig,
) -> Result<(f64, SelectedModel, Vec<usize>)> {
    let pre = cfg.preprocess.fit(train)?;
    let sources = pre.sources(train.n_features());
    let train = pre.apply(train)?;
    let test = pre.apply(test)?;
    let model = selector.fit(&train, lambda, &cfg.fit)?;
    let probs = predict_dataset(&model.params, &test);
    let mut source_support: Vec<usize> = model.support.iter().map(|&j| sources[j]).collect();
    source_support.sort_unstable();
    source_support.dedup();
    Ok((metric.score(&probs, test.y())?, model, source_support))
}

/// Tunes lambda by inner cross-validation on `train_rows`, refits on all of
/// them and scores the rows in `test_rows`. Nothing about the test rows is
/// read before the final scoring.
pub fn evaluate_split(
    d: &Dataset,
    train_rows: &[usize],
    test_rows: &[usize],
    selector: &Selector,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<SplitOutcome> {
    let train = d.select_rows(train_rows);
    let grid = cfg.grid_desc();
    let mut validation = Vec::with_capacity(grid.len());
    let mut best = (grid[0], f64::NEG_INFINITY);
    if grid.len() > 1 {
        let inner = stratified_kfold(train.y(), cfg.folds, seed)?;
        for &lambda in &grid {
            let mut sum = 0.0;
            for f in &inner {
                let (s, _, _) = fit_and_score(
                    &train.select_rows(&f.train),
                    &train.select_rows(&f.test),
                    selector,
                    lambda,
                    Metric::Auc,
                    cfg,
                )?;
                sum += s;
            }
            let mean = sum / inner.len() as f64;
            validation.push((lambda, mean));
            if mean > best.1 {
                best = (lambda, mean);
            }
        }
    }
    let lambda = best.0;
    let (test_metric, model, source_support) = fit_and_score(&train, &d.select_rows(test_rows), selector, lambda, cfg.metric, cfg)?;
    Ok(SplitOutcome {
        lambda,
        validation,
        test_metric,
        support: model.support,
        source_support,
        status: model.status,
        params: model.params,
    })
}

/// Nested stratified cross-validation of `selector` on `d`.
pub fn nested_cv(d: &Dataset, selector: &Selector, cfg: &EvalConfig, seed: u64) -> Result<CvOutcome> {
    cfg.validate()?;
    let outer = stratified_kfold(d.y(), cfg.folds, derive_seed(seed, &[0]))?;
    let folds = outer
        .iter()
        .enumerate()
        .map(|(i, f)| evaluate_split(d, &f.train, &f.test, selector, cfg, derive_seed(seed, &[1, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    let mean_metric = folds.iter().map(|f| f.test_metric).sum::<f64>() / folds.len() as f64;
    Ok(CvOutcome { mean_metric, folds })
}

/// Element of sorted `v` at nearest rank `ceil(p n)` (1-based).
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Mean fraction of each feature class that was selected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassFractions {
    pub informative: f64,
    pub redundant: f64,
    pub uninformative: f64,
}

/// Per-class selected fractions of one support; a class with no members
/// counts as zero.
pub fn class_fractions(support: &[usize], classes: &[FeatureClass]) -> ClassFractions {
    let frac = |c: FeatureClass| {
        let total = classes.iter().filter(|&&k| k == c).count();
        let hit = support.iter().filter(|&&j| classes[j] == c).count();
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    };
    ClassFractions {
        informative: frac(FeatureClass::Informative),
        redundant: frac(FeatureClass::Redundant),
        uninformative: frac(FeatureClass::Uninformative),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    /// Most frequent support (smallest in lexicographic order on ties).
    pub modal_support: Vec<usize>,
    pub modal_frequency: f64,
    /// Share of supports containing each feature.
    pub feature_frequency: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStats {
    /// Present only when features carry class tags.
    pub fractions: Option<ClassFractions>,
    /// 2.5% and 97.5% nearest-rank quantiles of the per-support fractions.
    pub fractions_ci: Option<(ClassFractions, ClassFractions)>,
    pub stability: Stability,
}

pub fn selection_stats(supports: &[Vec<usize>], n_features: usize, classes: Option<&[FeatureClass]>) -> Result<SelectionStats> {
    if supports.is_empty() {
        return Err(Error::InvalidData("no supports".into()));
    }
    if let Some(c) = classes {
        if c.len() != n_features {
            return Err(Error::DimensionMismatch {
                expected: n_features,
                found: c.len(),
            });
        }
    }
    let r = supports.len() as f64;
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut hits = vec![0usize; n_features];
    for s in supports {
        let mut s = s.clone();
        s.sort_unstable();
        s.dedup();
        for &j in &s {
            if j >= n_features {
                return Err(Error::DimensionMismatch {
                    expected: n_features,
                    found: j + 1,
                });
            }
            hits[j] += 1;
        }
        *counts.entry(s).or_default() += 1;
    }
    let freq: Vec<f64> = hits.iter().map(|&h| h as f64 / r).collect();
    // BTreeMap iterates in lexicographic order, so the first maximum wins
    let (modal, &modal_count) = counts
        .iter()
        .fold(None, |acc: Option<(&Vec<usize>, &usize)>, (s, c)| match acc {
            Some((_, &best)) if best >= *c => acc,
            _ => Some((s, c)),
        })
        .expect("nonempty");
    let (fractions, fractions_ci) = match classes {
        Some(c) => {
            let per: Vec<ClassFractions> = supports.iter().map(|s| class_fractions(s, c)).collect();
            let column = |f: fn(&ClassFractions) -> f64| {
                let mut v: Vec<f64> = per.iter().map(f).collect();
                v.sort_by(f64::total_cmp);
                (v.iter().sum::<f64>() / r, nearest_rank(&v, 0.025), nearest_rank(&v, 0.975))
            };
            let i = column(|c| c.informative);
            let d = column(|c| c.redundant);
            let u = column(|c| c.uninformative);
            let pick = |k: usize| {
                let g = |t: (f64, f64, f64)| [t.0, t.1, t.2][k];
                ClassFractions {
                    informative: g(i),
                    redundant: g(d),
                    uninformative: g(u),
                }
            };
            (Some(pick(0)), Some((pick(1), pick(2))))
        }
        None => (None, None),
    };
    Ok(SelectionStats {
        fractions,
        fractions_ci,
        stability: Stability {
            modal_support: modal.clone(),
            modal_frequency: modal_count as f64 / r,
            feature_frequency: freq,
        },
    })
}

/// One bootstrap replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    /// Resamples drawn, including the accepted one.
    pub attempts: usize,
    pub test_metric: f64,
    pub fold_lambdas: Vec<f64>,
    /// Input features selected in each outer fold.
    pub fold_supports: Vec<Vec<usize>>,
    /// Union of the outer-fold supports.
    pub support: Vec<usize>,
    /// Exact solves of this replicate that stopped before certification.
    pub uncertified_solves: usize,
}

impl ReplicateRecord {
    /// Class fractions averaged over the outer-fold selections.
    pub fn fractions(&self, classes: &[FeatureClass]) -> ClassFractions {
        let k = self.fold_supports.len().max(1) as f64;
        let mut acc = ClassFractions {
            informative: 0.0,
            redundant: 0.0,
            uninformative: 0.0,
        };
        for s in &self.fold_supports {
            let f = class_fractions(s, classes);
            acc.informative += f.informative / k;
            acc.redundant += f.redundant / k;
            acc.uninformative += f.uninformative / k;
        }
        acc
    }
}

/// Summary of a bootstrap evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub selector: Selector,
    pub metric: Metric,
    pub bootstrap_count: usize,
    /// Mean over replicates of the nested cross-validation metric.
    pub mean_test_metric: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub feature_names: Vec<String>,
    pub selection: SelectionStats,
    pub replicates: Vec<ReplicateRecord>,
}

fn bootstrap_rows(m: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from(seed);
    (0..m).map(|_| rng.random_range(0..m)).collect()
}

fn run_replicate(d: &Dataset, selector: &Selector, cfg: &EvalConfig, index: usize) -> Result<ReplicateRecord> {
    let base = derive_seed(cfg.seed, &[index as u64]);
    let mut attempt = 0;
    loop {
        let seed = derive_seed(base, &[attempt as u64]);
        let sample = d.select_rows(&bootstrap_rows(d.n_examples(), seed));
        match nested_cv(&sample, selector, cfg, seed) {
            Ok(cv) => {
                return Ok(ReplicateRecord {
                    index,
                    attempts: attempt + 1,
                    test_metric: cv.mean_metric,
                    fold_lambdas: cv.folds.iter().map(|f| f.lambda).collect(),
                    fold_supports: cv.folds.iter().map(|f| f.source_support.clone()).collect(),
                    support: cv.union_support(),
                    uncertified_solves: cv
                        .folds
                        .iter()
                        .filter(|f| f.status.is_some_and(|s| !s.is_certified()))
                        .count(),
                })
            }
            Err(Error::FoldTooSmall { .. } | Error::SingleClass) if attempt < cfg.max_redraws => attempt += 1,
            Err(e) => return Err(e),
        }
    }
}

/// Bootstrap evaluation: every replicate resamples all rows with replacement
/// and runs the full nested cross-validation. Replicates run on the current
/// rayon pool; results do not depend on the number of threads.
pub fn bootstrap_eval(d: &Dataset, selector: &Selector, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let replicates = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(d, selector, cfg, r))
        .collect::<Result<Vec<_>>>()?;
    let mut metrics: Vec<f64> = replicates.iter().map(|r| r.test_metric).collect();
    let mean_test_metric = metrics.iter().sum::<f64>() / metrics.len() as f64;
    metrics.sort_by(f64::total_cmp);
    // every outer fold is one selection
    let supports: Vec<Vec<usize>> = replicates.iter().flat_map(|r| r.fold_supports.iter().cloned()).collect();
    let selection = selection_stats(&supports, d.n_features(), d.feature_class())?;
    Ok(EvalReport {
        selector: *selector,
        metric: cfg.metric,
        bootstrap_count: replicates.len(),
        mean_test_metric,
        ci_low: nearest_rank(&metrics, 0.025),
        ci_high: nearest_rank(&metrics, 0.975),
        feature_names: d.feature_names().to_vec(),
        selection,
        replicates,
    })
}

impl EvalReport {
    /// Writes one CSV row per replicate. Supports are `;`-joined indices.
    pub fn write_replicates_csv<W: Write>(&self, out: W, classes: Option<&[FeatureClass]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "replicate",
            "attempts",
            "test_metric",
            "fold_lambdas",
            "support",
            "n_selected",
            "informative",
            "redundant",
            "uninformative",
            "uncertified_solves",
        ])?;
        let join = |v: &[String]| v.join(";");
        for r in &self.replicates {
            let f = classes.map(|c| r.fractions(c));
            let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
            w.write_record([
                r.index.to_string(),
                r.attempts.to_string(),
                r.test_metric.to_string(),
                join(&r.fold_lambdas.iter().map(|l| l.to_string()).collect::<Vec<_>>()),
                join(&r.support.iter().map(|j| j.to_string()).collect::<Vec<_>>()),
                r.support.len().to_string(),
                opt(f.map(|f| f.informative)),
                opt(f.map(|f| f.redundant)),
                opt(f.map(|f| f.uninformative)),
                r.uncertified_solves.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<replicate csv>", e))?;
        Ok(())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        let y = [-1.0, -1.0, 1.0, 1.0];
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &y).unwrap(), 0.75);
        assert_eq!(auc(&[0.1, 0.2, 0.3, 0.4], &y).unwrap(), 1.0);
        assert_eq!(auc(&[0.5; 4], &y).unwrap(), 0.5);
        assert!(matches!(auc(&[0.1, 0.2], &[1.0, 1.0]), Err(Error::SingleClass)));
    }

    #[test]
    fn auc_matches_pair_counting() {
        let mut rng = rng_from(5);
        for _ in 0..50 {
            let n = rng.random_range(2..40);
            let s: Vec<f64> = (0..n).map(|_| (rng.random_range(0..6) as f64) / 5.0).collect();
            let mut y: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            y[0] = 1.0;
            y[1] = -1.0;
            let mut pairs = 0.0;
            let mut wins = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if y[i] > 0.0 && y[j] < 0.0 {
                        pairs += 1.0;
                        wins += if s[i] > s[j] {
                            1.0
                        } else if s[i] == s[j] {
                            0.5
                        } else {
                            0.0
                        };
                    }
                }
            }
            assert!((auc(&s, &y).unwrap() - wins / pairs).abs() < 1e-12);
        }
    }

    #[test]
    fn accuracy_complement() {
        let p = [0.1, 0.7, 0.9, 0.3, 0.55];
        let y = [-1.0, 1.0, -1.0, -1.0, 1.0];
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let a = accuracy_at_half(&p, &y).unwrap();
        assert_eq!(a, 0.8);
        assert!((a + accuracy_at_half(&p, &neg).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn folds_partition_and_stratify() {
        let y: Vec<f64> = (0..50).map(|i| if i % 4 == 0 { 1.0 } else { -1.0 }).collect();
        let folds = stratified_kfold(&y, 3, 7).unwrap();
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        let pos: Vec<usize> = folds.iter().map(|f| f.test.iter().filter(|&&i| y[i] > 0.0).count()).collect();
        assert!(pos.iter().max().unwrap() - pos.iter().min().unwrap() <= 1);
        for f in &folds {
            assert_eq!(f.train.len() + f.test.len(), 50);
            assert!(f.train.iter().all(|i| !f.test.contains(i)));
        }
        assert_eq!(folds, stratified_kfold(&y, 3, 7).unwrap());
        assert_ne!(folds, stratified_kfold(&y, 3, 8).unwrap());
        assert!(matches!(
            stratified_kfold(&[1.0, 1.0, -1.0, -1.0, -1.0], 3, 0),
            Err(Error::FoldTooSmall { minority: 2, folds: 3 })
        ));
    }

    #[test]
    fn nearest_rank_convention() {
        let v: Vec<f64> = (1..=399).map(|i| i as f64).collect();
        assert_eq!(nearest_rank(&v, 0.025), 10.0);
        assert_eq!(nearest_rank(&v, 0.975), 390.0);
        let v: Vec<f64> = (1..=49).map(|i| i as f64).collect();
        assert_eq!(nearest_rank(&v, 0.025), 2.0);
        assert_eq!(nearest_rank(&v, 0.975), 48.0);
        assert_eq!(nearest_rank(&[3.5], 0.025), 3.5);
        assert_eq!(nearest_rank(&[3.5], 0.975), 3.5);
    }

    #[test]
    fn stability_by_hand() {
        use FeatureClass::*;
        let classes = [Informative, Informative, Redundant, Uninformative];
        let s = selection_stats(&[vec![0, 1], vec![1, 0], vec![0, 3]], 4, Some(&classes)).unwrap();
        assert_eq!(s.stability.modal_support, vec![0, 1]);
        assert!((s.stability.modal_frequency - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.stability.feature_frequency, vec![1.0, 2.0 / 3.0, 0.0, 1.0 / 3.0]);
        let f = s.fractions.unwrap();
        assert!((f.informative - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(f.redundant, 0.0);
        assert!((f.uninformative - 1.0 / 3.0).abs() < 1e-15);

        let disjoint = selection_stats(&[vec![0], vec![1], vec![2], vec![3]], 4, None).unwrap();
        assert_eq!(disjoint.stability.modal_frequency, 0.25);
        assert_eq!(disjoint.stability.modal_support, vec![0]);
        assert!(disjoint.fractions.is_none());
        let same = selection_stats(&[vec![2, 1], vec![1, 2]], 4, None).unwrap();
        assert_eq!(same.stability.modal_frequency, 1.0);
    }

    #[test]
    fn ties_prefer_larger_lambda() {
        let cfg = EvalConfig {
            lambda_grid: vec![0.004, 0.1, 0.02],
            ..EvalConfig::default()
        };
        assert_eq!(cfg.grid_desc(), vec![0.1, 0.02, 0.004]);
    }
}
