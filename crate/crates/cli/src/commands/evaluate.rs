use std::path::PathBuf;

use bestsubset::data::{load_costs_csv, load_csv};
use bestsubset::datagen::sample_costs;
use bestsubset::eval::{bootstrap_eval, EvalConfig, Metric, Preprocess, Selector, DESK_REPLICATES, LAMBDA_GRID};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use super::create_dir;
use crate::config::{merge, require, workers};
use crate::{CmdResult, Failure, EXIT_RESOURCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectorArg {
    BnbCardinality,
    BnbBudget,
    GreedyTopk,
    GreedyBudget,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricArg {
    Auc,
    Accuracy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreprocessArg {
    Identity,
    Minmax,
    SplineMinmax,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EvaluateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Name of the label column [default: label].
    #[arg(long)]
    pub label_column: Option<String>,
    /// Label value mapped to the positive class [default: 1].
    #[arg(long)]
    pub positive: Option<String>,
    #[arg(long, value_enum)]
    pub selector: Option<SelectorArg>,
    /// Feature count for the cardinality selectors.
    #[arg(long)]
    pub k: Option<usize>,
    /// Budget for the budget selectors.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Feature costs: a CSV of `feature,cost` rows or `uniform:SEED`.
    #[arg(long)]
    pub costs: Option<String>,
    /// Outer test-fold metric [default: auc].
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    /// Transform fitted inside every training partition [default: minmax].
    #[arg(long, value_enum)]
    pub preprocess: Option<PreprocessArg>,
    /// Bootstrap replicates [default: 49].
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for the report JSON and replicate CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Allow more replicates than desk scale.
    #[arg(long)]
    #[serde(default)]
    pub yes_expensive: bool,
}

pub fn run(args: EvaluateArgs) -> CmdResult {
    let args = merge(&args, args.config.as_deref())?;
    let data = require(&args.data, "data")?;
    let out = require(&args.out, "out")?;
    let selector = match require(&args.selector, "selector")? {
        SelectorArg::BnbCardinality => Selector::BnbCardinality { k: require(&args.k, "k")? },
        SelectorArg::GreedyTopk => Selector::GreedyTopk { k: require(&args.k, "k")? },
        SelectorArg::BnbBudget => Selector::BnbBudget { budget: require(&args.budget, "budget")? },
        SelectorArg::GreedyBudget => Selector::GreedyBudget { budget: require(&args.budget, "budget")? },
        SelectorArg::None => Selector::None,
    };
    let replicates = args.replicates.unwrap_or(DESK_REPLICATES);
    if replicates > DESK_REPLICATES && !args.yes_expensive {
        return Err(Failure {
            code: EXIT_RESOURCE,
            message: format!("{replicates} replicates exceeds desk scale ({DESK_REPLICATES}); pass --yes-expensive to run it"),
        });
    }
    let mut d = load_csv(
        &data,
        args.label_column.as_deref().unwrap_or("label"),
        args.positive.as_deref().unwrap_or("1"),
    )?;
    if let Some(spec) = &args.costs {
        let costs = match spec.strip_prefix("uniform:") {
            Some(seed) => sample_costs(
                d.n_features(),
                seed.parse().map_err(|_| Failure::usage(format!("bad cost seed in '{spec}'")))?,
            ),
            None => load_costs_csv(spec, d.feature_names())?,
        };
        d = d.with_costs(costs)?;
    }
    let cfg = EvalConfig {
        lambda_grid: LAMBDA_GRID.to_vec(),
        metric: match args.metric.unwrap_or(MetricArg::Auc) {
            MetricArg::Auc => Metric::Auc,
            MetricArg::Accuracy => Metric::Accuracy,
        },
        preprocess: match args.preprocess.unwrap_or(PreprocessArg::Minmax) {
            PreprocessArg::Identity => Preprocess::Identity,
            PreprocessArg::Minmax => Preprocess::MinMax,
            PreprocessArg::SplineMinmax => Preprocess::SplineMinMax,
        },
        replicates,
        seed: args.seed.unwrap_or(0),
        ..EvalConfig::default()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers()?)
        .build()
        .map_err(|e| Failure::usage(format!("cannot start worker pool: {e}")))?;
    let report = pool.install(|| bootstrap_eval(&d, &selector, &cfg))?;
    create_dir(&out)?;
    report.write_json(out.join("report.json"))?;
    let csv = std::fs::File::create(out.join("replicates.csv"))?;
    report.write_replicates_csv(csv, d.feature_class())?;
    println!(
        "{} {:?}: mean {:.3} [{:.3}, {:.3}] over {} replicates",
        selector.name(),
        cfg.metric,
        report.mean_test_metric,
        report.ci_low,
        report.ci_high,
        report.bootstrap_count
    );
    let freq = &report.selection.stability.feature_frequency;
    let mut order: Vec<usize> = (0..freq.len()).filter(|&j| freq[j] > 0.0).collect();
    order.sort_by(|&a, &b| freq[b].total_cmp(&freq[a]).then(a.cmp(&b)));
    for j in order.into_iter().take(10) {
        println!("  {:<24} selected in {:.0}% of replicates", report.feature_names[j], 100.0 * freq[j]);
    }
    Ok(())
}
