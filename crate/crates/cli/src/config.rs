//! JSON config files whose keys mirror the command-line flags. Flags given
//! on the command line win over values from the file.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::Failure;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "BESTSUBSET_WORKERS";

/// Overlays the flags set in `cli` on the contents of `file`.
pub fn merge<T: Serialize + DeserializeOwned>(cli: &T, file: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = file else {
        return Ok(serde_json::from_value(serde_json::to_value(cli)?)?);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut base: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))?;
    let Value::Object(base_map) = &mut base else {
        return Err(Failure::usage("config file must hold a JSON object"));
    };
    let Value::Object(flags) = serde_json::to_value(cli)? else {
        unreachable!("argument structs serialize to objects")
    };
    for (k, v) in flags {
        // unset options and absent switches leave the file value alone
        if !matches!(v, Value::Null | Value::Bool(false)) {
            base_map.insert(k, v);
        }
    }
    serde_json::from_value(base).map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))
}

/// Worker count from the environment, defaulting to the available cores.
pub fn workers() -> Result<usize, Failure> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::usage(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn require<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, Failure> {
    v.clone().ok_or_else(|| Failure::usage(format!("missing required option --{flag}")))
}
