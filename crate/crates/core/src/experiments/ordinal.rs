use rand::seq::index::sample;

use crate::embedding::{embed_points, sdr_complete, Objective, SdrOptions};
use crate::error::{HdmError, Result};
use crate::gramian::{distance_matrix, Hdm, ObservationMask};
use crate::lorentz::{random_loid_points_with, LoidPoint};
use crate::par::{map_indexed, Execution};
use crate::solver::OrdinalConstraint;

use super::{all_pairs, sample_ordinal_set_with, trial_rng, TrialSummary, DEFAULT_SPREAD};

/// Fraction of all comparisons between distinct pairs whose orientation in
/// the embedding strictly agrees with `reference`. Ties count as wrong.
pub fn ordinal_accuracy(points: &[LoidPoint], reference: &Hdm) -> Result<f64> {
    if points.len() != reference.n() {
        return Err(HdmError::DimensionMismatch {
            expected: reference.n(),
            got: points.len(),
        });
    }
    let emb = distance_matrix(points)?;
    let pairs = all_pairs(reference.n());
    let truth: Vec<f64> = pairs.iter().map(|&(i, j)| reference.get(i, j)).collect();
    let est: Vec<f64> = pairs.iter().map(|&(i, j)| emb.get(i, j)).collect();
    let mut correct = 0usize;
    let mut total = 0usize;
    for q in 0..pairs.len() {
        for p in 0..q {
            total += 1;
            let a = truth[p].partial_cmp(&truth[q]);
            let b = est[p].partial_cmp(&est[q]);
            if a.is_some() && a == b && a != Some(std::cmp::Ordering::Equal) {
                correct += 1;
            }
        }
    }
    Ok(if total == 0 { 1.0 } else { correct as f64 / total as f64 })
}

/// Ordinal-only embedding with a minimum-distance constraint and a slack
/// budget `zeta_p = (p / 100) |O| eps2`.
#[derive(Debug, Clone)]
pub struct OrdinalBenchConfig {
    pub n: usize,
    /// Dimension of the generating point set.
    pub true_dim: usize,
    pub d_grid: Vec<usize>,
    pub k_per_pair: usize,
    /// Percentages `p` of the slack budget.
    pub zeta_grid: Vec<f64>,
    pub seed: u64,
    pub spread: f64,
    /// Fraction of sampled comparisons whose orientation is flipped.
    pub corruption: f64,
    pub options: SdrOptions,
    pub execution: Execution,
}

pub const ORDINAL_MIN_DISTANCE: f64 = 1.0;
/// Comparison margin used by the benchmark. The solver default (1e-2) is too
/// thin for the truncated embeddings to keep their ordering.
pub const ORDINAL_EPSILON2: f64 = 0.1;

impl OrdinalBenchConfig {
    pub fn new(n: usize, d_grid: Vec<usize>, k_per_pair: usize, zeta_grid: Vec<f64>, seed: u64) -> Self {
        Self {
            n,
            true_dim: 2,
            d_grid,
            k_per_pair,
            zeta_grid,
            seed,
            spread: DEFAULT_SPREAD,
            corruption: 0.0,
            options: SdrOptions {
                objective: Objective::Trace,
                epsilon2: ORDINAL_EPSILON2,
                min_distance: Some(ORDINAL_MIN_DISTANCE),
                ..SdrOptions::default()
            },
            execution: Execution::default(),
        }
    }
}

/// Generator distances and the (possibly corrupted) sampled comparisons.
pub fn ordinal_instance(cfg: &OrdinalBenchConfig) -> Result<(Hdm, Vec<OrdinalConstraint>)> {
    let mut rng = trial_rng(cfg.seed, 0, 0);
    let pts = random_loid_points_with(&mut rng, cfg.n, cfg.true_dim, cfg.spread)?;
    let d = distance_matrix(&pts)?;
    let mut set = sample_ordinal_set_with(&mut rng, &d, cfg.k_per_pair)?;
    let flips = (cfg.corruption * set.len() as f64).round() as usize;
    for k in sample(&mut rng, set.len(), flips.min(set.len())) {
        let c = set[k];
        set[k] = OrdinalConstraint::new(c.i3, c.i4, c.i1, c.i2)?;
    }
    Ok((d, set))
}

/// One summary per `(d, zeta)`; `mean` is the accuracy `gamma_d`.
pub fn ordinal_benchmark(cfg: &OrdinalBenchConfig) -> Result<Vec<TrialSummary>> {
    if cfg.d_grid.is_empty() || cfg.zeta_grid.is_empty() {
        return Err(HdmError::InvalidArgument("empty dimension or budget grid".into()));
    }
    if cfg.d_grid.contains(&0) {
        return Err(HdmError::InvalidArgument("embedding dimension must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.corruption) {
        return Err(HdmError::InvalidArgument("corruption must lie in [0, 1]".into()));
    }
    if let Some(p) = cfg.zeta_grid.iter().find(|p| !(**p >= 0.0)) {
        return Err(HdmError::InvalidArgument(format!("budget percentage {p} < 0")));
    }
    let (d, set) = ordinal_instance(cfg)?;
    if set.is_empty() {
        return Err(HdmError::NoData("no comparisons sampled".into()));
    }
    let blank = Hdm::zeros(cfg.n);
    let mask = ObservationMask::empty(cfg.n);
    let eps2 = cfg.options.epsilon2;

    let per_zeta = map_indexed(cfg.zeta_grid.len(), cfg.execution, |z| {
        let p = cfg.zeta_grid[z];
        let mut opts = cfg.options.clone();
        opts.slack_budget = Some(p / 100.0 * set.len() as f64 * eps2);
        let (g, report) = sdr_complete(&blank, &mask, &set, &opts)?;
        cfg.d_grid
            .iter()
            .map(|&dim| {
                let pts = embed_points(&g, dim)?;
                ordinal_accuracy(&pts, &d)
            })
            .collect::<Result<Vec<f64>>>()
            .map(|gammas| (gammas, report.converged))
    });

    let mut out = Vec::new();
    for (z, res) in per_zeta.into_iter().enumerate() {
        let (gammas, converged) = res?;
        for (k, &dim) in cfg.d_grid.iter().enumerate() {
            let mut s = TrialSummary::new("ordinal", cfg.n, cfg.seed, cfg.spread);
            s.dim = Some(dim);
            s.zeta_percent = Some(cfg.zeta_grid[z]);
            s.trials = 1;
            s.unconverged = usize::from(!converged);
            s.mean = gammas[k];
            s.std = 0.0;
            out.push(s);
        }
    }
    Ok(out)
}
