//! Synthetic prognostic datasets: one normal cluster per class at opposite
//! hypercube vertices in the informative subspace, one redundant feature that
//! is a random linear combination of the informative ones, Gaussian noise
//! features, class imbalance and exact-count label noise.

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureClass};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};

/// Generator settings for one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub m_examples: usize,
    pub n_features: usize,
    pub n_informative: usize,
    pub n_redundant: usize,
    pub label_noise: f64,
    pub minority_fraction: f64,
    pub clusters_per_class: usize,
    pub class_sep: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(m_examples: usize, n_features: usize, n_informative: usize, label_noise: f64, seed: u64) -> Self {
        Self {
            m_examples,
            n_features,
            n_informative,
            n_redundant: 1,
            label_noise,
            minority_fraction: 0.23,
            clusters_per_class: 1,
            class_sep: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m_examples < 2 || self.n_features == 0 {
            return bad("need at least 2 examples and 1 feature".into());
        }
        if self.n_informative == 0 {
            return bad("need at least one informative feature".into());
        }
        if self.n_informative + self.n_redundant > self.n_features {
            return bad(format!(
                "{} informative + {} redundant features exceed {} features",
                self.n_informative, self.n_redundant, self.n_features
            ));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return bad(format!("label noise must lie in [0, 0.5), got {}", self.label_noise));
        }
        if !(self.minority_fraction > 0.0 && self.minority_fraction <= 0.5) {
            return bad(format!(
                "minority fraction must lie in (0, 0.5], got {}",
                self.minority_fraction
            ));
        }
        if self.clusters_per_class != 1 {
            return bad("only one cluster per class is supported".into());
        }
        if !(self.class_sep > 0.0 && self.class_sep.is_finite()) {
            return bad(format!("class separation must be positive, got {}", self.class_sep));
        }
        if self.minority_count() == 0 || self.minority_count() >= self.m_examples {
            return bad("both classes need at least one example".into());
        }
        Ok(())
    }

    /// Minority (+1) examples before label noise: `ceil(fraction * M)`.
    pub fn minority_count(&self) -> usize {
        (self.minority_fraction * self.m_examples as f64).ceil() as usize
    }

    /// Number of labels flipped: `round(noise * M)`.
    pub fn flip_count(&self) -> usize {
        (self.label_noise * self.m_examples as f64).round() as usize
    }

    /// Events per variable implied by the configuration, `fraction * M / N`.
    pub fn nominal_epv(&self) -> f64 {
        self.minority_fraction * self.m_examples as f64 / self.n_features as f64
    }
}

/// A generated dataset with the bookkeeping needed to check it.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    /// Labels before noise, in the dataset's row order.
    pub clean_labels: Vec<f64>,
    /// Rows whose labels were flipped.
    pub flipped: Vec<usize>,
    /// Weights of the redundant features on the informative ones, in the
    /// order informative features were generated.
    pub redundant_weights: Vec<Vec<f64>>,
    /// `column_origin[j]` is the generation index of output column `j`.
    pub column_origin: Vec<usize>,
}

/// Generates the dataset described by `cfg` (unscaled).
pub fn generate(cfg: &ScenarioConfig) -> Result<Dataset> {
    generate_detailed(cfg).map(|s| s.dataset)
}

pub fn generate_detailed(cfg: &ScenarioConfig) -> Result<Synthetic> {
    cfg.validate()?;
    let mut rng = rng_from(cfg.seed);
    let m = cfg.m_examples;
    let n = cfg.n_features;
    let n_inf = cfg.n_informative;
    let n_red = cfg.n_redundant;

    let n_min = cfg.minority_count();
    let mut labels: Vec<f64> = (0..m).map(|i| if i < n_min { 1.0 } else { -1.0 }).collect();
    labels.shuffle(&mut rng);

    // generation order: informative, redundant, uninformative
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n_inf {
        let col: Vec<f64> = labels
            .iter()
            .map(|&y| {
                let e: f64 = StandardNormal.sample(&mut rng);
                y * cfg.class_sep + e
            })
            .collect();
        columns.push(col);
    }
    let mut redundant_weights = Vec::with_capacity(n_red);
    for _ in 0..n_red {
        let w: Vec<f64> = (0..n_inf).map(|_| StandardNormal.sample(&mut rng)).collect();
        let col = (0..m)
            .map(|i| (0..n_inf).map(|k| w[k] * columns[k][i]).sum())
            .collect();
        columns.push(col);
        redundant_weights.push(w);
    }
    for _ in n_inf + n_red..n {
        columns.push((0..m).map(|_| StandardNormal.sample(&mut rng)).collect());
    }

    let clean_labels = labels.clone();
    let mut flipped: Vec<usize> = index::sample(&mut rng, m, cfg.flip_count()).into_vec();
    flipped.sort_unstable();
    for &i in &flipped {
        labels[i] = -labels[i];
    }

    let mut column_origin: Vec<usize> = (0..n).collect();
    column_origin.shuffle(&mut rng);

    let class_of = |g: usize| {
        if g < n_inf {
            FeatureClass::Informative
        } else if g < n_inf + n_red {
            FeatureClass::Redundant
        } else {
            FeatureClass::Uninformative
        }
    };
    let name_of = |g: usize| {
        if g < n_inf {
            format!("inf{}", g + 1)
        } else if g < n_inf + n_red {
            format!("red{}", g - n_inf + 1)
        } else {
            format!("unf{}", g - n_inf - n_red + 1)
        }
    };
    let mut flat = Vec::with_capacity(m * n);
    for &g in &column_origin {
        flat.extend_from_slice(&columns[g]);
    }
    let names = column_origin.iter().map(|&g| name_of(g)).collect();
    let classes = column_origin.iter().map(|&g| class_of(g)).collect();
    let dataset = Dataset::new(DMatrix::from_vec(m, n, flat), labels, names)?.with_feature_class(classes)?;
    Ok(Synthetic {
        dataset,
        clean_labels,
        flipped,
        redundant_weights,
        column_origin,
    })
}

/// I.i.d. uniform integer costs in 1..=10.
pub fn sample_costs(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from(seed);
    (0..n).map(|_| rng.random_range(1..=10u32) as f64).collect()
}

/// Sizes of the grid, in increasing order of events per variable.
pub const GRID_SHAPES: [(usize, usize); 4] = [(82, 53), (82, 14), (1090, 53), (1090, 14)];
pub const GRID_NOISE: [f64; 2] = [0.0, 0.05];

/// The eight scenarios: four (M, N) shapes times two noise levels, with five
/// informative features and seeds derived from `base_seed`. Noise-free
/// scenarios come first.
pub fn scenario_grid_seeded(base_seed: u64) -> Vec<ScenarioConfig> {
    let mut grid = Vec::with_capacity(8);
    for &noise in &GRID_NOISE {
        for &(m, n) in &GRID_SHAPES {
            let idx = grid.len() as u64;
            grid.push(ScenarioConfig::new(m, n, 5, noise, derive_seed(base_seed, &[idx])));
        }
    }
    grid
}

pub fn scenario_grid() -> Vec<ScenarioConfig> {
    scenario_grid_seeded(0)
}
