//! From (partial) distance data to points: relaxation, low-rank Lorentz
//! approximation, spectral factorization and projection onto the hyperboloid.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{HdmError, Result};
use crate::gramian::{distance_matrix, Hdm, ObservationMask};
use crate::lorentz::{to_poincare, LoidPoint, PoincarePoint};
use crate::par::{map_indexed, Execution};
use crate::solver::{solve_split_sdp, OrdinalConstraint, SolverConfig, SolverReport, SplitSdpProblem};

const ROOT_TOL: f64 = 1e-12;
const ROOT_MAX_ITERS: usize = 200;

/// Relaxation objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Trace,
    /// Trace solve followed by `rounds` log-det reweighting rounds.
    Logdet { rounds: usize },
}

pub const DEFAULT_LOGDET_ROUNDS: usize = 5;

/// Knobs of [`sdr_complete`] and [`hdgp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdrOptions {
    pub objective: Objective,
    /// Absolute fidelity budget; overrides `relative_epsilon1`.
    pub epsilon1: Option<f64>,
    /// Fidelity budget relative to `||W o cosh[D]||_F^2`.
    pub relative_epsilon1: f64,
    pub epsilon2: f64,
    pub min_distance: Option<f64>,
    pub slack_budget: Option<f64>,
    pub solver: SolverConfig,
}

impl Default for SdrOptions {
    fn default() -> Self {
        Self {
            objective: Objective::Trace,
            epsilon1: None,
            relative_epsilon1: crate::solver::DEFAULT_RELATIVE_EPSILON1,
            epsilon2: crate::solver::DEFAULT_EPSILON2,
            min_distance: None,
            slack_budget: None,
            solver: SolverConfig::default(),
        }
    }
}

/// Output of the full pipeline.
#[derive(Debug, Clone)]
pub struct EmbeddingResult {
    pub loid_points: Vec<LoidPoint>,
    pub poincare_points: Vec<PoincarePoint>,
    pub gramian: DMatrix<f64>,
    pub report: SolverReport,
    pub recon_hdm: Hdm,
    /// Fewer than `d` positive eigenvalues survived; missing axes were zero-padded.
    pub rank_deficient: bool,
}

/// Eigenpairs sorted ascending.
fn sorted_eigen(g: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if !g.is_square() {
        return Err(HdmError::NotSquare {
            rows: g.nrows(),
            cols: g.ncols(),
        });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(HdmError::Numeric("non-finite Gramian entry".into()));
    }
    let sym = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000)
        .ok_or_else(|| HdmError::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..g.nrows()).collect();
    // Stable sort: ties keep the eigensolver's order.
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(g.nrows(), g.nrows(), |i, k| eig.eigenvectors[(i, order[k])]);
    Ok((vals, vecs))
}

/// Selected spectrum: the most negative eigenpair and the `d` largest others.
struct LorentzSpectrum {
    lambda0: f64,
    u0: usize,
    /// (eigenvalue clipped at 0, column index), largest first.
    top: Vec<(f64, usize)>,
    vecs: DMatrix<f64>,
}

fn lorentz_spectrum(g: &DMatrix<f64>, d: usize) -> Result<LorentzSpectrum> {
    let (vals, vecs) = sorted_eigen(g)?;
    let n = vals.len();
    if n == 0 {
        return Err(HdmError::NoData("empty Gramian".into()));
    }
    if !(vals[0] < 0.0) {
        return Err(HdmError::Eigenstructure(format!(
            "no negative eigenvalue (smallest is {})",
            vals[0]
        )));
    }
    let top = (1..n).rev().take(d).map(|k| (vals[k].max(0.0), k)).collect();
    Ok(LorentzSpectrum {
        lambda0: vals[0],
        u0: 0,
        top,
        vecs,
    })
}

/// Best rank-`(d+1)` Lorentz approximation:
/// `U diag(lambda_0, u(lambda_1), ..., u(lambda_d)) U^T`.
pub fn low_rank_lorentz_approx(g: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    let s = lorentz_spectrum(g, d)?;
    let n = g.nrows();
    let mut out = DMatrix::zeros(n, n);
    let u0 = s.vecs.column(s.u0);
    out.ger(s.lambda0, &u0, &u0, 1.0);
    for &(l, k) in &s.top {
        if l > 0.0 {
            let v = s.vecs.column(k);
            out.ger(l, &v, &v, 1.0);
        }
    }
    Ok((&out + out.transpose()) * 0.5)
}

/// Factor `X` ((d+1) x N) with `X^T H X = g`, gauge `R = I`; row 0 is
/// oriented so that its entries sum to a nonnegative value.
pub fn spectral_factor(g: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    spectral_factor_flagged(g, d).map(|(x, _)| x)
}

fn spectral_factor_flagged(g: &DMatrix<f64>, d: usize) -> Result<(DMatrix<f64>, bool)> {
    if d == 0 {
        return Err(HdmError::InvalidArgument("dimension must be >= 1".into()));
    }
    let s = lorentz_spectrum(g, d)?;
    let n = g.nrows();
    let scale = s.lambda0.abs().max(s.top.first().map_or(0.0, |t| t.0));
    let thresh = 1e-8 * scale;
    let (vals, _) = sorted_eigen(g)?;
    if vals.len() > 1 && vals[1] < -thresh {
        return Err(HdmError::Eigenstructure(format!(
            "more than one negative eigenvalue ({}, {})",
            vals[0], vals[1]
        )));
    }

    let mut x = DMatrix::zeros(d + 1, n);
    let r0 = s.vecs.column(s.u0) * s.lambda0.abs().sqrt();
    x.row_mut(0).copy_from(&r0.transpose());
    let mut positive = 0;
    for (row, &(l, k)) in s.top.iter().enumerate() {
        if l > thresh {
            positive += 1;
        }
        let r = s.vecs.column(k) * l.sqrt();
        x.row_mut(row + 1).copy_from(&r.transpose());
    }
    if x.row(0).sum() < 0.0 {
        x.row_mut(0).neg_mut();
    }
    let rank_deficient = positive < d.min(n.saturating_sub(1));
    Ok((x, rank_deficient))
}

/// Euclidean-nearest point of the hyperboloid together with the multiplier
/// `lambda` satisfying `(I + lambda H) x = z`.
pub fn project_to_loid_with_multiplier(z: &[f64]) -> Result<(LoidPoint, f64)> {
    if z.len() < 2 {
        return Err(HdmError::DimensionMismatch {
            expected: 2,
            got: z.len(),
        });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(HdmError::InvalidArgument("non-finite coordinate".into()));
    }
    let z0 = z[0];
    let zbar = &z[1..];
    let b = zbar.iter().map(|v| v * v).sum::<f64>().sqrt();

    if b == 0.0 {
        let mut coords = vec![0.0; z.len()];
        if z0 <= 2.0 {
            coords[0] = 1.0;
            return Ok((LoidPoint::from_raw(coords), 1.0 - z0));
        }
        let x0 = 0.5 * z0;
        coords[0] = x0;
        coords[1] = (x0 * x0 - 1.0).sqrt();
        return Ok((LoidPoint::from_raw(coords), -1.0));
    }

    // With x = (cosh t, sinh t * zbar/b) the stationarity condition reduces to
    // g(t) = sinh 2t - z0 sinh t - b cosh t = 0, which has one root on (0, inf).
    let g = |t: f64| (2.0 * t).sinh() - z0 * t.sinh() - b * t.cosh();
    let dg = |t: f64| 2.0 * (2.0 * t).cosh() - z0 * t.cosh() - b * t.sinh();
    let mut lo = 0.0;
    let mut hi = 1.0;
    while g(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..ROOT_MAX_ITERS {
        let gt = g(t);
        let scale = (2.0 * t).sinh() + (z0 * t.sinh()).abs() + b * t.cosh();
        if gt.abs() <= 4.0 * f64::EPSILON * scale {
            break;
        }
        if gt < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo <= ROOT_TOL * hi.max(1.0) {
            t = 0.5 * (lo + hi);
            break;
        }
        let step = t - gt / dg(t);
        t = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
    }
    let (ch, sh) = (t.cosh(), t.sinh());
    let mut coords = Vec::with_capacity(z.len());
    coords.push(ch);
    coords.extend(zbar.iter().map(|v| sh * v / b));
    let lambda = 1.0 - z0 / ch;
    Ok((LoidPoint::from_raw(coords), lambda))
}

/// Euclidean-nearest point of the hyperboloid to `z`.
pub fn project_to_loid(z: &[f64]) -> Result<LoidPoint> {
    project_to_loid_with_multiplier(z).map(|(x, _)| x)
}

/// Low-rank approximation, factorization and per-column projection.
pub fn embed_points(g: &DMatrix<f64>, d: usize) -> Result<Vec<LoidPoint>> {
    embed_points_with(g, d, Execution::default()).map(|(p, _)| p)
}

/// [`embed_points`] with explicit scheduling; also reports rank deficiency.
pub fn embed_points_with(
    g: &DMatrix<f64>,
    d: usize,
    exec: Execution,
) -> Result<(Vec<LoidPoint>, bool)> {
    let approx = low_rank_lorentz_approx(g, d)?;
    let (x, deficient) = spectral_factor_flagged(&approx, d)?;
    let cols: Vec<Vec<f64>> = (0..x.ncols()).map(|j| x.column(j).iter().copied().collect()).collect();
    let points = map_indexed(cols.len(), exec, |j| project_to_loid(&cols[j]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok((points, deficient))
}

/// `D = acosh(max(1, -G))` with zero diagonal, for solver output whose
/// entries may sit a few residuals above -1.
pub fn hdm_from_solution(g: &DMatrix<f64>) -> Result<Hdm> {
    let n = g.nrows();
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (-0.5 * (g[(i, j)] + g[(j, i)])).max(1.0).acosh()
        }
    });
    Hdm::new(d)
}

/// Builds the relaxation for the given data and options.
pub fn build_problem(
    dtilde: &Hdm,
    mask: &ObservationMask,
    ordinal: &[OrdinalConstraint],
    options: &SdrOptions,
) -> Result<SplitSdpProblem> {
    let n = dtilde.n();
    if mask.n() != n {
        return Err(HdmError::DimensionMismatch {
            expected: n,
            got: mask.n(),
        });
    }
    if mask.count() == 0 && ordinal.is_empty() {
        return Err(HdmError::NoData("no measured distances and no comparisons".into()));
    }
    let mut p = SplitSdpProblem::new(n).with_distances(dtilde, mask)?;
    p = match options.epsilon1 {
        Some(e) => p.with_epsilon1(e),
        None => p.with_relative_epsilon1(options.relative_epsilon1),
    };
    if mask.count() == 0 {
        p = p.with_epsilon1(1.0);
    }
    p = p.with_ordinal(ordinal.to_vec(), options.epsilon2);
    if let Some(l) = options.min_distance {
        p = p.with_min_distance(l);
    }
    if let Some(z) = options.slack_budget {
        p = p.with_slack_budget(z);
    }
    p.validate()?;
    Ok(p)
}

/// Completes and denoises the distance data; returns `G = G+ - G-`.
/// Non-convergence is reported through `SolverReport::converged`.
pub fn sdr_complete(
    dtilde: &Hdm,
    mask: &ObservationMask,
    ordinal: &[OrdinalConstraint],
    options: &SdrOptions,
) -> Result<(DMatrix<f64>, SolverReport)> {
    let problem = build_problem(dtilde, mask, ordinal, options)?;
    let mut config = options.solver.clone();
    config.logdet_rounds = match options.objective {
        Objective::Trace => 0,
        Objective::Logdet { rounds } => rounds,
    };
    let (split, report) = solve_split_sdp(&problem, &config)?;
    Ok((split.gramian(), report))
}

/// Complete pipeline: relaxation, embedding in `L^d`, and Poincare images.
pub fn hdgp(
    dtilde: &Hdm,
    mask: &ObservationMask,
    ordinal: &[OrdinalConstraint],
    d: usize,
    options: &SdrOptions,
) -> Result<EmbeddingResult> {
    let (gramian, report) = sdr_complete(dtilde, mask, ordinal, options)?;
    let (loid_points, rank_deficient) = embed_points_with(&gramian, d, Execution::default())?;
    let poincare_points = loid_points.iter().map(to_poincare).collect();
    let recon_hdm = distance_matrix(&loid_points)?;
    Ok(EmbeddingResult {
        loid_points,
        poincare_points,
        gramian,
        report,
        recon_hdm,
        rank_deficient,
    })
}
