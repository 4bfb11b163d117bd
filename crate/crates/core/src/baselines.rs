//! Heuristic selection baselines and the exhaustive-enumeration oracle.

use crate::bnb::{SolveResult, SolveStatus};
use crate::data::{support_cost, Dataset, FitConfig, SelectionConstraint};
use crate::error::{Error, Result};
use crate::logistic::{fit_support, newton_fit, ModelParams};

/// Coefficient norm at which a univariable fit counts as separable.
const SEPARABLE_NORM: f64 = 1e3;

/// Largest feature count accepted by [`exhaustive_best_subset`].
pub const EXHAUSTIVE_MAX_FEATURES: usize = 20;

/// `|slope|` of the unregularized slope-plus-intercept logistic fit of the
/// labels on each feature alone; separable features score `+inf`.
pub fn univariable_scores(d: &Dataset) -> Result<Vec<f64>> {
    let (pos, neg) = d.class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let cfg = FitConfig::default();
    (0..d.n_features())
        .map(|j| match newton_fit(&[d.column(j)], d.y(), 0.0, &cfg, None, SEPARABLE_NORM) {
            Ok(fit) => Ok(fit.coef[0].abs()),
            Err(Error::Unbounded) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        })
        .collect()
}

/// Indices ordered by decreasing key, lowest index first on ties.
fn ranked(keys: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    idx
}

/// The `k` features with the largest univariable scores (sorted indices).
pub fn greedy_topk(d: &Dataset, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > d.n_features() {
        return Err(Error::InvalidConfig(format!(
            "k must lie in 1..={}, got {k}",
            d.n_features()
        )));
    }
    let scores = univariable_scores(d)?;
    let mut top: Vec<usize> = ranked(&scores).into_iter().take(k).collect();
    top.sort_unstable();
    Ok(top)
}

/// Scans features by decreasing score-to-cost ratio and keeps each one whose
/// cost still fits the remaining budget.
pub fn greedy_budget(d: &Dataset, budget: f64) -> Result<Vec<usize>> {
    let costs = d.costs().ok_or(Error::MissingCosts)?;
    if !(budget >= 0.0) {
        return Err(Error::Infeasible);
    }
    let scores = univariable_scores(d)?;
    let ratio: Vec<f64> = scores.iter().zip(costs).map(|(s, c)| s / c).collect();
    let mut chosen = Vec::new();
    for j in ranked(&ratio) {
        chosen.push(j);
        if support_cost(costs, &chosen) > budget {
            chosen.pop();
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Enumerates every feasible support, fits each, and returns the best.
pub fn exhaustive_best_subset(
    d: &Dataset,
    constraint: SelectionConstraint,
    lambda: f64,
    cfg: &FitConfig,
) -> Result<SolveResult> {
    let n = d.n_features();
    if n > EXHAUSTIVE_MAX_FEATURES {
        return Err(Error::TooLarge {
            n,
            max: EXHAUSTIVE_MAX_FEATURES,
        });
    }
    let (costs, budget) = constraint.resolve(d)?;
    if budget < 0.0 {
        return Err(Error::Infeasible);
    }
    let mut best: Option<(f64, Vec<usize>, ModelParams)> = None;
    for_each_feasible_support(&costs, budget, |support| {
        let fit = fit_support(d, support, lambda, cfg)?;
        let v = fit.objective.total;
        if best.as_ref().is_none_or(|(b, _, _)| v < *b) {
            best = Some((v, support.to_vec(), fit.params));
        }
        Ok(())
    })?;
    let (objective, support, params) = best.expect("empty support is feasible");
    Ok(SolveResult {
        params,
        support,
        objective,
        lower_bound: objective,
        rel_gap: 0.0,
        nodes_explored: 0,
        status: SolveStatus::Optimal,
    })
}

/// Calls `f` on every support (sorted, including the empty one) whose cost
/// is within budget, in lexicographic order of the inclusion bitmask.
pub fn for_each_feasible_support(
    costs: &[f64],
    budget: f64,
    mut f: impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    let n = costs.len();
    let mut support = Vec::with_capacity(n);
    for mask in 0u64..(1u64 << n) {
        support.clear();
        support.extend((0..n).filter(|&j| mask >> j & 1 == 1));
        if support_cost(costs, &support) <= budget {
            f(&support)?;
        }
    }
    Ok(())
}
