pub mod evaluate;
pub mod experiment;
pub mod solve;
pub mod synth;
pub mod verify;

use std::path::Path;

use serde::Serialize;

use crate::Failure;

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path).map_err(|e| Failure::usage(format!("cannot create {}: {e}", path.display())))
}
