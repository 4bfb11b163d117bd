//! Fixtures shared by the benchmarks.

use bestsubset::data::minmax_scale;
use bestsubset::datagen::{generate, scenario_grid};
use bestsubset::Dataset;

/// Min-max scaled dataset of grid scenario `index`.
pub fn scenario(index: usize) -> Dataset {
    minmax_scale(&generate(&scenario_grid()[index]).expect("grid scenarios are valid"))
}
