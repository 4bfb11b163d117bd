use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use bestsubset::bnb::{solve_traced, TraceRecord};
use bestsubset::conic::{build_program, export_cbf};
use bestsubset::data::{load_costs_csv, load_csv, minmax_scale};
use bestsubset::datagen::sample_costs;
use bestsubset::{FitConfig, SelectionConstraint, SolveResult, SolveStatus};
use clap::Args;
use serde::{Deserialize, Serialize};

use super::write_json;
use crate::config::{merge, require};
use crate::{CmdResult, Failure};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SolveArgs {
    /// JSON file with defaults for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Name of the label column [default: label].
    #[arg(long)]
    pub label_column: Option<String>,
    /// Label value mapped to the positive class [default: 1].
    #[arg(long)]
    pub positive: Option<String>,
    /// `k=INT` or `budget=REAL`.
    #[arg(long)]
    pub constraint: Option<String>,
    /// Feature costs: a CSV of `feature,cost` rows or `uniform:SEED`.
    #[arg(long)]
    pub costs: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Relative optimality gap [default: 1e-4].
    #[arg(long)]
    pub gap: Option<f64>,
    #[arg(long)]
    pub max_nodes: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Min-max scale the features before solving.
    #[arg(long)]
    #[serde(default)]
    pub minmax: bool,
    /// Output JSON; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the mixed-integer conic program in CBF format.
    #[arg(long)]
    pub export_cbf: Option<PathBuf>,
    /// JSON-lines solver trace, one record per evaluated node.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

/// Solver output together with the problem it answers.
#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub constraint: SelectionConstraint,
    pub lambda: f64,
    pub selected_features: Vec<String>,
    #[serde(flatten)]
    pub result: SolveResult,
}

pub fn parse_constraint(text: &str) -> Result<SelectionConstraint, Failure> {
    let bad = || Failure::usage(format!("constraint must be k=INT or budget=REAL, got '{text}'"));
    let (key, value) = text.split_once('=').ok_or_else(bad)?;
    match key.trim() {
        "k" => {
            let k: usize = value.trim().parse().map_err(|_| bad())?;
            Ok(SelectionConstraint::Cardinality(k as f64))
        }
        "budget" => {
            let b: f64 = value.trim().parse().map_err(|_| bad())?;
            if !b.is_finite() {
                return Err(bad());
            }
            Ok(SelectionConstraint::Budget(b))
        }
        _ => Err(bad()),
    }
}

pub fn run(args: SolveArgs) -> CmdResult {
    let args = merge(&args, args.config.as_deref())?;
    let data = require(&args.data, "data")?;
    let constraint = parse_constraint(&require(&args.constraint, "constraint")?)?;
    let lambda = require(&args.lambda, "lambda")?;
    let label = args.label_column.as_deref().unwrap_or("label");
    let positive = args.positive.as_deref().unwrap_or("1");

    let mut d = load_csv(&data, label, positive)?;
    if args.minmax {
        d = minmax_scale(&d);
    }
    match (&args.costs, constraint) {
        (Some(spec), _) => {
            let costs = match spec.strip_prefix("uniform:") {
                Some(seed) => {
                    let seed = seed
                        .parse()
                        .map_err(|_| Failure::usage(format!("bad cost seed in '{spec}'")))?;
                    sample_costs(d.n_features(), seed)
                }
                None => load_costs_csv(spec, d.feature_names())?,
            };
            d = d.with_costs(costs)?;
        }
        (None, SelectionConstraint::Budget(_)) => {
            return Err(Failure::usage("a budget constraint needs --costs"));
        }
        _ => {}
    }

    let mut cfg = FitConfig::default();
    if let Some(g) = args.gap {
        cfg.rel_gap_tol = g;
    }
    cfg.max_nodes = args.max_nodes;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }

    if let Some(path) = &args.export_cbf {
        export_cbf(&build_program(&d, constraint, lambda)?, path)?;
    }

    let result = match &args.trace {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            let mut io_error = None;
            let result = solve_traced(&d, constraint, lambda, &cfg, |t: &TraceRecord| {
                if io_error.is_none() {
                    let line = serde_json::to_string(t).expect("trace records serialize");
                    if let Err(e) = writeln!(w, "{line}") {
                        io_error = Some(e);
                    }
                }
            })?;
            if let Some(e) = io_error {
                return Err(e.into());
            }
            w.flush()?;
            result
        }
        None => solve_traced(&d, constraint, lambda, &cfg, |_| {})?,
    };

    let status = result.status;
    let report = SolveReport {
        constraint,
        lambda,
        selected_features: result.support.iter().map(|&j| d.feature_names()[j].clone()).collect(),
        result,
    };
    match &args.out {
        Some(path) => write_json(path, &report)?,
        None => {
            // a closed pipe downstream is not an error worth reporting
            let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&report)?);
        }
    }
    match status {
        SolveStatus::Optimal | SolveStatus::GapReached => Ok(()),
        SolveStatus::NodeLimit => Err(Failure::numerical(format!(
            "node limit reached with relative gap {:.3e}",
            report.result.rel_gap
        ))),
        SolveStatus::Infeasible => Err(Failure::numerical("constraint is infeasible")),
    }
}
