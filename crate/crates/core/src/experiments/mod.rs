//! Synthetic benchmarks: completion under missing measurements, weighted-tree
//! embedding against a Euclidean baseline, and ordinal embedding.

mod ordinal;
mod sampling;
mod sparsity;
mod tree;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use ordinal::{ordinal_accuracy, ordinal_benchmark, ordinal_instance, OrdinalBenchConfig, ORDINAL_EPSILON2, ORDINAL_MIN_DISTANCE};
pub use sampling::{
    all_pairs, complete_ordinal_count, complete_ordinal_set, sample_metric_mask,
    sample_metric_mask_with, sample_ordinal_set, sample_ordinal_set_with,
};
pub use sparsity::{sparsity_success_curve, SparsityConfig};
pub use tree::{
    euclidean_distances_by_dim, hyperbolic_distances_by_dim, optimal_embedding_dimension,
    random_weighted_tree, random_weighted_tree_with, tree_benchmark, tree_distance_matrix, TreeBenchConfig,
    WeightedTree, TREE_DIMENSION_DELTA, TREE_RELATIVE_EPSILON1,
};

/// Standard deviation of the Gaussian spatial parts of random point sets.
pub const DEFAULT_SPREAD: f64 = 1.0;

/// Independent, reproducible stream per `(seed, grid point, trial)`, so that
/// results do not depend on scheduling.
pub fn trial_rng(seed: u64, grid: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(grid.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ trial);
    rng
}

/// Aggregate over the trials of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub experiment: String,
    pub n: usize,
    pub dim: Option<usize>,
    pub density: Option<f64>,
    pub zeta_percent: Option<f64>,
    pub trials: usize,
    pub successes: Option<usize>,
    pub success_rate: Option<f64>,
    /// Trials whose solve returned an error (scored as failures / excluded).
    pub solver_failures: usize,
    /// Trials that hit the iteration cap (best iterate still scored).
    pub unconverged: usize,
    pub mean: f64,
    pub std: f64,
    pub mean_d0: Option<f64>,
    pub std_d0: Option<f64>,
    pub spread: f64,
    pub seed: u64,
}

impl TrialSummary {
    pub(crate) fn new(experiment: &str, n: usize, seed: u64, spread: f64) -> Self {
        Self {
            experiment: experiment.to_string(),
            n,
            dim: None,
            density: None,
            zeta_percent: None,
            trials: 0,
            successes: None,
            success_rate: None,
            solver_failures: 0,
            unconverged: 0,
            mean: f64::NAN,
            std: f64::NAN,
            mean_d0: None,
            std_d0: None,
            spread,
            seed,
        }
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
