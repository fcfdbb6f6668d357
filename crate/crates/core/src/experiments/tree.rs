use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{embed_points, sdr_complete, Objective, SdrOptions, DEFAULT_LOGDET_ROUNDS};
use crate::error::{HdmError, Result};
use crate::gramian::{distance_matrix, relative_error, Hdm, ObservationMask};
use crate::par::{map_indexed, Execution};
use crate::solver::{solve_psd_least_squares, SolverConfig};

use super::{mean_std, trial_rng, TrialSummary};

const MAX_DEGREE: usize = 3;

/// A weighted tree on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTree {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl WeightedTree {
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(u, v, _) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }
}

/// Random recursive tree with degree cap 3 and i.i.d. `unif(0,1)` weights.
pub fn random_weighted_tree(n: usize, seed: u64) -> Result<WeightedTree> {
    let mut rng = trial_rng(seed, 0, 2);
    random_weighted_tree_with(&mut rng, n)
}

pub fn random_weighted_tree_with<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<WeightedTree> {
    if n < 2 {
        return Err(HdmError::InvalidArgument(format!("a tree needs n >= 2, got {n}")));
    }
    let mut deg = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    for v in 1..n {
        let open: Vec<usize> = (0..v).filter(|&u| deg[u] < MAX_DEGREE).collect();
        let u = open[rng.random_range(0..open.len())];
        // Open interval (0, 1): weights must be positive.
        let mut w: f64 = rng.random();
        while w == 0.0 {
            w = rng.random();
        }
        deg[u] += 1;
        deg[v] += 1;
        edges.push((u, v, w));
    }
    Ok(WeightedTree { n, edges })
}

/// Path-length metric of a tree.
pub fn tree_distance_matrix(t: &WeightedTree) -> Result<Hdm> {
    if t.edges.len() + 1 != t.n {
        return Err(HdmError::InvalidArgument("edge count is not n - 1".into()));
    }
    let mut adj = vec![Vec::new(); t.n];
    for &(u, v, w) in &t.edges {
        if u >= t.n || v >= t.n || !(w >= 0.0) {
            return Err(HdmError::InvalidArgument(format!("bad edge ({u}, {v}, {w})")));
        }
        adj[u].push((v, w));
        adj[v].push((u, w));
    }
    let mut d = DMatrix::from_element(t.n, t.n, f64::NAN);
    for s in 0..t.n {
        d[(s, s)] = 0.0;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &(v, w) in &adj[u] {
                if d[(s, v)].is_nan() {
                    d[(s, v)] = d[(s, u)] + w;
                    stack.push(v);
                }
            }
        }
    }
    if d.iter().any(|v| v.is_nan()) {
        return Err(HdmError::InvalidArgument("tree is not connected".into()));
    }
    Hdm::new((&d + d.transpose()) * 0.5)
}

/// Smallest `d` at which one more dimension stops reducing the error to the
/// full-dimensional reconstruction: `E_{d+1} >= (1 - delta) E_d` with
/// `E_d = ||D_{N-1} - D_d||_F`. Both errors below a plateau threshold
/// (`1e-6 ||D_{N-1}||_F`, at least `1e-12`) count as satisfied.
///
/// `d_matrices[k]` holds the reconstruction in dimension `k + 1`.
pub fn optimal_embedding_dimension(d_matrices: &[DMatrix<f64>], delta: f64) -> Result<usize> {
    let full = d_matrices
        .last()
        .ok_or_else(|| HdmError::InvalidArgument("no reconstructions given".into()))?;
    let plateau = (1e-6 * full.norm()).max(1e-12);
    let errs: Vec<f64> = d_matrices.iter().map(|m| (full - m).norm()).collect();
    for k in 0..errs.len().saturating_sub(1) {
        let (e, next) = (errs[k], errs[k + 1]);
        if (e < plateau && next < plateau) || next >= (1.0 - delta) * e {
            return Ok(k + 1);
        }
    }
    Ok(d_matrices.len())
}

/// Distances of the hyperbolic embeddings of `g` in dimensions `1..n`.
pub fn hyperbolic_distances_by_dim(g: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
    let n = g.nrows();
    (1..n.max(2))
        .map(|d| Ok(distance_matrix(&embed_points(g, d)?)?.into_inner()))
        .collect()
}

/// Distances of the top-`d` eigen-coordinates of a Euclidean Gramian, `d = 1..n`.
pub fn euclidean_distances_by_dim(g: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let n = g.nrows();
    let eig = SymmetricEigen::new((g + g.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut coords = DMatrix::<f64>::zeros(0, n);
    let mut out = Vec::new();
    for d in 1..n.max(2) {
        let mut next = DMatrix::zeros(d, n);
        next.rows_mut(0, d - 1).copy_from(&coords);
        if let Some(&k) = order.get(d - 1) {
            let s = eig.eigenvalues[k].max(0.0).sqrt();
            for j in 0..n {
                next[(d - 1, j)] = s * eig.eigenvectors[(j, k)];
            }
        }
        coords = next;
        out.push(DMatrix::from_fn(n, n, |i, j| (coords.column(i) - coords.column(j)).norm()));
    }
    out
}

/// Paired hyperbolic/Euclidean tree benchmark.
#[derive(Debug, Clone)]
pub struct TreeBenchConfig {
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// `delta` of the optimal-dimension rule.
    pub delta: f64,
    pub options: SdrOptions,
    pub euclidean: SolverConfig,
    pub execution: Execution,
}

pub const TREE_DIMENSION_DELTA: f64 = 1e-3;
/// Fidelity budget for the log-det tree fits, relative to `||cosh[D]||_F^2`.
pub const TREE_RELATIVE_EPSILON1: f64 = 1e-4;

impl TreeBenchConfig {
    pub fn new(n_grid: Vec<usize>, trials: usize, seed: u64) -> Self {
        let options = SdrOptions {
            objective: Objective::Logdet {
                rounds: DEFAULT_LOGDET_ROUNDS,
            },
            relative_epsilon1: TREE_RELATIVE_EPSILON1,
            ..SdrOptions::default()
        };
        Self {
            n_grid,
            trials,
            seed,
            delta: TREE_DIMENSION_DELTA,
            options,
            euclidean: SolverConfig::default(),
            execution: Execution::default(),
        }
    }
}

struct PairedOutcome {
    hyp: (f64, usize, bool),
    euc: (f64, usize, bool),
}

fn run_trial(cfg: &TreeBenchConfig, grid: usize, trial: usize) -> Result<Option<PairedOutcome>> {
    let n = cfg.n_grid[grid];
    let mut rng = trial_rng(cfg.seed, grid as u64, trial as u64);
    let tree = random_weighted_tree_with(&mut rng, n)?;
    let dt = tree_distance_matrix(&tree)?;
    let norm = dt.values().norm();

    let hyp = match sdr_complete(&dt, &ObservationMask::full(n), &[], &cfg.options) {
        Ok((g, report)) => match hyperbolic_distances_by_dim(&g) {
            Ok(ds) => {
                let d0 = optimal_embedding_dimension(&ds, cfg.delta)?;
                (relative_error(dt.values(), &ds[d0 - 1]), d0, report.converged)
            }
            Err(HdmError::Eigenstructure(_)) | Err(HdmError::Numeric(_)) => return Ok(None),
            Err(e) => return Err(e),
        },
        Err(HdmError::Numeric(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let dsq = dt.values().component_mul(dt.values());
    let euc = match solve_psd_least_squares(&dsq, &cfg.euclidean) {
        Ok(fit) => {
            let ds = euclidean_distances_by_dim(&fit.gramian);
            let d0 = optimal_embedding_dimension(&ds, cfg.delta)?;
            let err = if norm == 0.0 { 0.0 } else { relative_error(dt.values(), &ds[d0 - 1]) };
            (err, d0, fit.converged)
        }
        Err(HdmError::Numeric(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    Ok(Some(PairedOutcome { hyp, euc }))
}

/// One `(hyperbolic, euclidean)` summary pair per tree size; `mean`/`std`
/// describe `e_rel` at each side's optimal dimension.
pub fn tree_benchmark(cfg: &TreeBenchConfig) -> Result<Vec<(TrialSummary, TrialSummary)>> {
    if cfg.trials == 0 || cfg.n_grid.is_empty() {
        return Err(HdmError::InvalidArgument("need a nonempty grid and trials >= 1".into()));
    }
    if let Some(&n) = cfg.n_grid.iter().find(|&&n| n < 2) {
        return Err(HdmError::InvalidArgument(format!("tree size {n} < 2")));
    }
    let jobs = cfg.n_grid.len() * cfg.trials;
    let outcomes = map_indexed(jobs, cfg.execution, |k| run_trial(cfg, k / cfg.trials, k % cfg.trials));
    let mut iter = outcomes.into_iter();
    let mut out = Vec::new();
    for &n in &cfg.n_grid {
        let mut sides = [
            TrialSummary::new("tree-hyperbolic", n, cfg.seed, 0.0),
            TrialSummary::new("tree-euclidean", n, cfg.seed, 0.0),
        ];
        let mut errs = [Vec::new(), Vec::new()];
        let mut dims = [Vec::new(), Vec::new()];
        for o in iter.by_ref().take(cfg.trials) {
            match o? {
                Some(p) => {
                    for (k, (e, d0, conv)) in [p.hyp, p.euc].into_iter().enumerate() {
                        errs[k].push(e);
                        dims[k].push(d0 as f64);
                        if !conv {
                            sides[k].unconverged += 1;
                        }
                    }
                }
                None => {
                    sides[0].solver_failures += 1;
                    sides[1].solver_failures += 1;
                }
            }
        }
        for k in 0..2 {
            let s = &mut sides[k];
            s.trials = cfg.trials;
            (s.mean, s.std) = mean_std(&errs[k]);
            let (md, sd) = mean_std(&dims[k]);
            s.mean_d0 = Some(md);
            s.std_d0 = Some(sd);
        }
        let [h, e] = sides;
        out.push((h, e));
    }
    Ok(out)
}
