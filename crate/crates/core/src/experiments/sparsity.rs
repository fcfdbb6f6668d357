use crate::embedding::{hdm_from_solution, sdr_complete, SdrOptions};
use crate::error::{HdmError, Result};
use crate::gramian::{distance_matrix, relative_error};
use crate::lorentz::random_loid_points_with;
use crate::par::{map_indexed, Execution};

use super::{mean_std, sample_metric_mask_with, trial_rng, TrialSummary, DEFAULT_SPREAD};

/// Success probability of noise-free completion as a function of the
/// fraction `S` of withheld distances.
#[derive(Debug, Clone)]
pub struct SparsityConfig {
    pub n: usize,
    pub dim: usize,
    pub grid: Vec<f64>,
    pub trials: usize,
    /// Success threshold on `e_rel`.
    pub delta: f64,
    pub seed: u64,
    pub spread: f64,
    pub options: SdrOptions,
    pub execution: Execution,
}

impl SparsityConfig {
    pub fn new(n: usize, dim: usize, grid: Vec<f64>, trials: usize, delta: f64, seed: u64) -> Self {
        Self {
            n,
            dim,
            grid,
            trials,
            delta,
            seed,
            spread: DEFAULT_SPREAD,
            options: SdrOptions::default(),
            execution: Execution::default(),
        }
    }
}

struct Outcome {
    e_rel: Option<f64>,
    converged: bool,
}

fn run_trial(cfg: &SparsityConfig, grid: usize, trial: usize) -> Result<Outcome> {
    let mut rng = trial_rng(cfg.seed, grid as u64, trial as u64);
    let pts = random_loid_points_with(&mut rng, cfg.n, cfg.dim, cfg.spread)?;
    let d = distance_matrix(&pts)?;
    let mask = sample_metric_mask_with(&mut rng, cfg.n, cfg.grid[grid])?;
    match sdr_complete(&d, &mask, &[], &cfg.options) {
        Ok((g, report)) => {
            let dh = hdm_from_solution(&g)?;
            Ok(Outcome {
                e_rel: Some(relative_error(d.values(), dh.values())),
                converged: report.converged,
            })
        }
        Err(HdmError::NoData(_)) | Err(HdmError::Numeric(_)) => Ok(Outcome {
            e_rel: None,
            converged: false,
        }),
        Err(e) => Err(e),
    }
}

/// One summary per grid value; `mean`/`std` describe `e_rel` over trials
/// whose solve returned.
pub fn sparsity_success_curve(cfg: &SparsityConfig) -> Result<Vec<TrialSummary>> {
    if cfg.trials == 0 {
        return Err(HdmError::InvalidArgument("need at least one trial".into()));
    }
    if cfg.grid.is_empty() {
        return Err(HdmError::InvalidArgument("empty density grid".into()));
    }
    if let Some(s) = cfg.grid.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(HdmError::InvalidArgument(format!("density {s} outside [0, 1]")));
    }
    let jobs = cfg.grid.len() * cfg.trials;
    let outcomes = map_indexed(jobs, cfg.execution, |k| {
        run_trial(cfg, k / cfg.trials, k % cfg.trials)
    });

    let mut out = Vec::with_capacity(cfg.grid.len());
    let mut iter = outcomes.into_iter();
    for &s in &cfg.grid {
        let mut summary = TrialSummary::new("sparsity", cfg.n, cfg.seed, cfg.spread);
        summary.dim = Some(cfg.dim);
        summary.density = Some(s);
        summary.trials = cfg.trials;
        let mut errs = Vec::new();
        let mut successes = 0;
        for o in iter.by_ref().take(cfg.trials) {
            let o = o?;
            match o.e_rel {
                Some(e) => {
                    if e <= cfg.delta {
                        successes += 1;
                    }
                    if !o.converged {
                        summary.unconverged += 1;
                    }
                    errs.push(e);
                }
                None => summary.solver_failures += 1,
            }
        }
        let (m, sd) = mean_std(&errs);
        summary.mean = m;
        summary.std = sd;
        summary.successes = Some(successes);
        summary.success_rate = Some(successes as f64 / cfg.trials as f64);
        out.push(summary);
    }
    Ok(out)
}
