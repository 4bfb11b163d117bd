use std::path::{Path, PathBuf};

use bestsubset::eval::DESK_REPLICATES;
use bestsubset::experiment::{run_experiment_with_workers, ExperimentConfig, ExperimentResult, Interval, Role, Scale, Suite};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use super::create_dir;
use crate::config::{merge, require, workers};
use crate::svg::{Bar, BarChart, Series, PALETTE};
use crate::{CmdResult, Failure, EXIT_RESOURCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteArg {
    Cardinality,
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleArg {
    Desk,
    Full,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub suite: Option<SuiteArg>,
    /// Bootstrap replicates per run; overrides the scale default.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// `desk` uses 49 replicates, `full` 399 [default: desk].
    #[arg(long, value_enum)]
    pub scale: Option<ScaleArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated scenario indices [default: all eight].
    #[arg(long, value_delimiter = ',')]
    pub scenarios: Option<Vec<usize>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Allow runs larger than desk scale.
    #[arg(long)]
    #[serde(default)]
    pub yes_expensive: bool,
}

pub fn run(args: ExperimentArgs) -> CmdResult {
    let args = merge(&args, args.config.as_deref())?;
    let out = require(&args.out, "out")?;
    let suite = match require(&args.suite, "suite")? {
        SuiteArg::Cardinality => Suite::Cardinality,
        SuiteArg::Budget => Suite::Budget,
    };
    let scale = match args.scale.unwrap_or(ScaleArg::Desk) {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Full => Scale::Full,
    };
    let mut cfg = ExperimentConfig::for_suite(suite, scale);
    cfg.replicates = args.replicates;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(s) = &args.scenarios {
        cfg.scenarios = s.clone();
    }
    cfg.validate()?;
    if cfg.replicate_count() > DESK_REPLICATES && !args.yes_expensive {
        return Err(Failure {
            code: EXIT_RESOURCE,
            message: format!(
                "{} replicates per run exceeds desk scale ({DESK_REPLICATES}); pass --yes-expensive to run it",
                cfg.replicate_count()
            ),
        });
    }
    let workers = workers()?;
    eprintln!(
        "running {} suite: {} runs x 2 selectors x {} replicates on {workers} workers",
        suite.name(),
        cfg.runs().len(),
        cfg.replicate_count()
    );
    let result = run_experiment_with_workers(&cfg, workers)?;
    result.write_outputs(&out)?;
    write_figures(&result, &out.join("figures"))?;
    for a in result.aggregates() {
        println!(
            "scenario {} epv {:>5.2} noise {:.2} {:<7} auc {:.3} [{:.3}, {:.3}] informative {:.3} redundant {:.3} uninformative {:.3}",
            a.scenario,
            a.nominal_epv,
            a.label_noise,
            a.role.name(),
            a.metric.mean,
            a.metric.low,
            a.metric.high,
            a.informative.mean,
            a.redundant.mean,
            a.uninformative.mean
        );
    }
    Ok(())
}

const CLASSES: [&str; 3] = ["informative", "redundant", "uninformative"];
const ROLES: [Role; 2] = [Role::Optimal, Role::Greedy];

/// Chart plus the CSV rows behind it.
struct Figure {
    stem: String,
    chart: BarChart,
}

impl Figure {
    fn write(&self, dir: &Path) -> Result<(), Failure> {
        let svg = dir.join(format!("{}.svg", self.stem));
        std::fs::write(&svg, self.chart.render())?;
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", self.stem)))
            .map_err(|e| Failure::usage(e.to_string()))?;
        let csv_err = |e: csv::Error| Failure::usage(e.to_string());
        w.write_record(["group", "series", "value", "low", "high"]).map_err(csv_err)?;
        for s in &self.chart.series {
            for (g, b) in self.chart.groups.iter().zip(&s.bars) {
                w.write_record([g.clone(), s.name.clone(), b.value.to_string(), b.low.to_string(), b.high.to_string()])
                    .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn bar(i: &Interval) -> Bar {
    Bar {
        value: i.mean,
        low: i.low,
        high: i.high,
    }
}

fn class_series(bars: impl Fn(Role, usize) -> Vec<Bar>) -> Vec<Series> {
    let mut series = Vec::new();
    for (c, class) in CLASSES.iter().enumerate() {
        for (r, role) in ROLES.iter().enumerate() {
            series.push(Series {
                name: format!("{} {class}", role.name()),
                color: PALETTE[2 * c + r],
                bars: bars(*role, c),
            });
        }
    }
    series
}

/// Class-fraction charts per noise level and per scenario, and an AUC chart.
fn figures(result: &ExperimentResult) -> Vec<Figure> {
    let suite = result.config.suite.name();
    let aggregates = result.aggregates();
    let pick = |a: &bestsubset::experiment::ScenarioAggregate, c: usize| match c {
        0 => a.informative,
        1 => a.redundant,
        _ => a.uninformative,
    };
    let mut out = Vec::new();
    let mut noises: Vec<f64> = aggregates.iter().map(|a| a.label_noise).collect();
    noises.sort_by(f64::total_cmp);
    noises.dedup();
    for noise in noises {
        let level: Vec<_> = aggregates.iter().filter(|a| a.label_noise == noise).collect();
        let mut groups: Vec<String> = Vec::new();
        for a in &level {
            let g = format!("EPV {:.2}", a.nominal_epv);
            if !groups.contains(&g) {
                groups.push(g);
            }
        }
        let series = class_series(|role, c| {
            level.iter().filter(|a| a.role == role).map(|a| bar(&pick(a, c))).collect()
        });
        out.push(Figure {
            stem: format!("{suite}_noise{}", (noise * 100.0).round()),
            chart: BarChart {
                title: format!("{suite} suite, {}% label noise", (noise * 100.0).round()),
                y_label: "fraction of class selected".into(),
                groups,
                series,
                y_max: 1.0,
            },
        });
    }

    for &s in &result.config.scenarios {
        let runs: Vec<_> = result.runs.iter().filter(|r| r.spec.scenario == s).collect();
        let Some(first) = runs.first() else { continue };
        let groups = runs
            .iter()
            .map(|r| match result.config.suite {
                Suite::Cardinality => format!("k = {}", r.spec.data.n_informative),
                Suite::Budget => format!("cost draw {}", r.spec.run + 1),
            })
            .collect();
        let series = class_series(|role, c| {
            runs.iter()
                .map(|r| {
                    let sel = &r.report(role).selection;
                    let (Some(f), Some((lo, hi))) = (sel.fractions, sel.fractions_ci) else {
                        return Bar { value: 0.0, low: 0.0, high: 0.0 };
                    };
                    let get = |x: &bestsubset::eval::ClassFractions| [x.informative, x.redundant, x.uninformative][c];
                    Bar { value: get(&f), low: get(&lo), high: get(&hi) }
                })
                .collect()
        });
        out.push(Figure {
            stem: format!("{suite}_s{s}"),
            chart: BarChart {
                title: format!(
                    "scenario {s}: M = {}, N = {}, {}% noise",
                    first.spec.data.m_examples,
                    first.spec.data.n_features,
                    (first.spec.data.label_noise * 100.0).round()
                ),
                y_label: "fraction of class selected".into(),
                groups,
                series,
                y_max: 1.0,
            },
        });
    }

    let groups = result
        .config
        .scenarios
        .iter()
        .filter_map(|&s| aggregates.iter().find(|a| a.scenario == s))
        .map(|a| format!("s{} EPV {:.2}", a.scenario, a.nominal_epv))
        .collect();
    let series = ROLES
        .iter()
        .enumerate()
        .map(|(r, &role)| Series {
            name: role.name().into(),
            color: PALETTE[r * 2],
            bars: aggregates.iter().filter(|a| a.role == role).map(|a| bar(&a.metric)).collect(),
        })
        .collect();
    out.push(Figure {
        stem: format!("{suite}_auc"),
        chart: BarChart {
            title: format!("{suite} suite, cross-validated AUC"),
            y_label: "AUC".into(),
            groups,
            series,
            y_max: 1.0,
        },
    });
    out
}

pub fn write_figures(result: &ExperimentResult, dir: &Path) -> Result<(), Failure> {
    create_dir(dir)?;
    for f in figures(result) {
        f.write(dir)?;
    }
    Ok(())
}
