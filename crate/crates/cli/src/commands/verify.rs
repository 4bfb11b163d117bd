use std::path::PathBuf;

use bestsubset::oracle::{run_battery, CheckReport, OracleConfig};
use clap::Args;
use serde::{Deserialize, Serialize};

use super::write_json;
use crate::config::merge;
use crate::{CmdResult, Failure};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct VerifyArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Largest feature count checked against enumeration [default: 12].
    #[arg(long)]
    pub oracle_max_n: Option<usize>,
    /// Random instances per check [default: 200].
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Inflate every relaxation bound to confirm the battery catches it.
    #[arg(long, hide = true)]
    #[serde(default)]
    pub inject_fault: bool,
    /// Also write the table as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<CheckReport>,
}

pub fn run(args: VerifyArgs) -> CmdResult {
    let args = merge(&args, args.config.as_deref())?;
    let mut cfg = OracleConfig::default();
    if let Some(n) = args.oracle_max_n {
        cfg.max_n = n;
    }
    if let Some(i) = args.instances {
        cfg.instances = i;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.inject_fault {
        cfg.fit.bound_offset = 5.0;
    }
    let checks = run_battery(&cfg)?;
    println!("{:<34} {:>9} {:>8} {:>11} {:>9}  result", "check", "instances", "failures", "worst", "tolerance");
    for c in &checks {
        println!(
            "{:<34} {:>9} {:>8} {:>11.3e} {:>9.0e}  {}",
            c.name,
            c.instances,
            c.failures,
            c.worst,
            c.tolerance,
            if c.passed() { "pass" } else { "FAIL" }
        );
        if let Some(f) = &c.first_failure {
            println!("    first failure: {f}");
        }
    }
    let report = VerifyReport {
        passed: checks.iter().all(CheckReport::passed),
        checks,
    };
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    if report.passed {
        Ok(())
    } else {
        let failed = report.checks.iter().filter(|c| !c.passed()).count();
        Err(Failure::numerical(format!("{failed} of {} checks failed", report.checks.len())))
    }
}
