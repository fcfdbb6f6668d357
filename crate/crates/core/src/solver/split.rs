//! Operator-splitting solver (OSQP-style ADMM) for the split-PSD relaxation.
//!
//! Variables are the scaled half-vectorizations `a = svec(G+)`, `b = svec(G-)`.
//! Constraints are written as `z = A x` with `A = [I 0; 0 I; B -B]`, where
//! `B` collects the linear rows acting on `u = a - b = svec(G)`. The KKT
//! system decouples into `v = a + b` (scalar) and `u` (one dense Cholesky
//! factor of size `n(n+1)/2`).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::psd::{logdet_reweight, logdet_shifted, project_svec_psd, SvecLayout};
use super::{SolverConfig, SolverReport, SplitSdpProblem};
use crate::error::Result;
use crate::gramian::HGramianSplit;

const SQRT2: f64 = std::f64::consts::SQRT_2;
const EQUALITY_RHO_SCALE: f64 = 1e3;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;

/// Linear rows of `B`, each with at most two nonzeros.
#[derive(Debug, Clone)]
struct LinearRows {
    idx: Vec<[usize; 2]>,
    coef: Vec<[f64; 2]>,
    n_diag: usize,
    n_off: usize,
    n_fid: usize,
    off_bound: Vec<f64>,
    fid_center: Vec<f64>,
    fid_radius: f64,
    eps2: f64,
    zeta: f64,
}

impl LinearRows {
    fn build(problem: &SplitSdpProblem, layout: &SvecLayout) -> Self {
        let n = problem.n;
        let mut idx = Vec::new();
        let mut coef = Vec::new();
        for i in 0..n {
            let p = layout.index(i, i);
            idx.push([p, p]);
            coef.push([1.0, 0.0]);
        }
        let cap = problem.offdiag_cap();
        let mut off_bound = Vec::new();
        for j in 0..n {
            for i in 0..j {
                let p = layout.index(i, j);
                idx.push([p, p]);
                coef.push([1.0, 0.0]);
                off_bound.push(SQRT2 * cap);
            }
        }
        let mut fid_center = Vec::new();
        for (i, j) in problem.mask.measured_pairs() {
            let p = layout.index(i, j);
            idx.push([p, p]);
            coef.push([1.0, 0.0]);
            fid_center.push(-SQRT2 * problem.target_cosh[(i, j)]);
        }
        for c in &problem.ordinal {
            idx.push([layout.index(c.i1, c.i2), layout.index(c.i3, c.i4)]);
            coef.push([1.0 / SQRT2, -1.0 / SQRT2]);
        }
        Self {
            idx,
            coef,
            n_diag: n,
            n_off: off_bound.len(),
            n_fid: fid_center.len(),
            off_bound,
            fid_center,
            fid_radius: problem.epsilon1.sqrt(),
            eps2: problem.epsilon2,
            zeta: problem.slack_budget.unwrap_or(0.0),
        }
    }

    fn len(&self) -> usize {
        self.idx.len()
    }

    fn fid_start(&self) -> usize {
        self.n_diag + self.n_off
    }

    fn ord_start(&self) -> usize {
        self.fid_start() + self.n_fid
    }

    fn row_rho(&self, k: usize, rho: f64) -> f64 {
        if k < self.n_diag {
            rho * EQUALITY_RHO_SCALE
        } else {
            rho
        }
    }

    fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.idx
                .iter()
                .zip(&self.coef)
                .map(|(ix, c)| c[0] * u[ix[0]] + c[1] * u[ix[1]]),
        )
    }

    fn apply_t(&self, w: &DVector<f64>, m: usize) -> DVector<f64> {
        let mut out = DVector::zeros(m);
        for (k, (ix, c)) in self.idx.iter().zip(&self.coef).enumerate() {
            out[ix[0]] += c[0] * w[k];
            out[ix[1]] += c[1] * w[k];
        }
        out
    }

    /// `(sigma + rho) I + 2 B^T R B`.
    fn kkt_matrix(&self, m: usize, sigma: f64, rho: f64) -> DMatrix<f64> {
        let mut k = DMatrix::identity(m, m) * (sigma + rho);
        for (r, (ix, c)) in self.idx.iter().zip(&self.coef).enumerate() {
            let w = 2.0 * self.row_rho(r, rho);
            for a in 0..2 {
                for b in 0..2 {
                    k[(ix[a], ix[b])] += w * c[a] * c[b];
                }
            }
        }
        k
    }

    fn project(&self, v: &mut DVector<f64>) {
        for k in 0..self.n_diag {
            v[k] = -1.0;
        }
        for k in 0..self.n_off {
            let r = self.n_diag + k;
            v[r] = v[r].min(self.off_bound[k]);
        }
        let fs = self.fid_start();
        if self.n_fid > 0 {
            let dist: f64 = (0..self.n_fid)
                .map(|k| (v[fs + k] - self.fid_center[k]).powi(2))
                .sum::<f64>()
                .sqrt();
            if dist > self.fid_radius {
                let s = self.fid_radius / dist;
                for k in 0..self.n_fid {
                    v[fs + k] = self.fid_center[k] + s * (v[fs + k] - self.fid_center[k]);
                }
            }
        }
        let os = self.ord_start();
        project_ordinal(&mut v.as_mut_slice()[os..], self.eps2, self.zeta);
    }
}

/// Projection onto `{v : sum_k (eps2 - v_k)_+ <= zeta}`.
pub(crate) fn project_ordinal(v: &mut [f64], eps2: f64, zeta: f64) {
    let total: f64 = v.iter().map(|&x| (eps2 - x).max(0.0)).sum();
    if total <= zeta {
        return;
    }
    if zeta <= 0.0 {
        for x in v.iter_mut() {
            *x = x.max(eps2);
        }
        return;
    }
    // Soft-threshold the shortfalls w = eps2 - v so that sum (w - tau)_+ = zeta.
    let mut w: Vec<f64> = v.iter().map(|&x| eps2 - x).filter(|&s| s > 0.0).collect();
    w.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, &s) in w.iter().enumerate() {
        cum += s;
        let t = (cum - zeta) / (k + 1) as f64;
        if s > t {
            tau = t;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        let s = eps2 - *x;
        if s > 0.0 {
            *x = eps2 - (s - tau).max(0.0);
        }
    }
}

/// One ADMM instance; owns all iterate state.
#[derive(Debug, Clone)]
pub struct SplitSdpSolver {
    problem: SplitSdpProblem,
    config: SolverConfig,
    layout: SvecLayout,
    rows: LinearRows,
    q_a: DVector<f64>,
    q_b: DVector<f64>,
    x_a: DVector<f64>,
    x_b: DVector<f64>,
    z_a: DVector<f64>,
    z_b: DVector<f64>,
    z_l: DVector<f64>,
    y_a: DVector<f64>,
    y_b: DVector<f64>,
    y_l: DVector<f64>,
    rho: f64,
}

struct Residuals {
    primal: f64,
    dual: f64,
}

impl SplitSdpSolver {
    pub fn new(problem: &SplitSdpProblem, config: &SolverConfig) -> Result<Self> {
        problem.validate()?;
        config.validate()?;
        let layout = SvecLayout::new(problem.n);
        let rows = LinearRows::build(problem, &layout);
        let m = layout.len();
        let q_a = layout.svec(&problem.weight_plus);
        let q_b = layout.svec(&problem.weight_minus);
        let nl = rows.len();
        let mut solver = Self {
            problem: problem.clone(),
            config: config.clone(),
            layout,
            rows,
            q_a,
            q_b,
            x_a: DVector::zeros(m),
            x_b: DVector::zeros(m),
            z_a: DVector::zeros(m),
            z_b: DVector::zeros(m),
            z_l: DVector::zeros(nl),
            y_a: DVector::zeros(m),
            y_b: DVector::zeros(m),
            y_l: DVector::zeros(nl),
            rho: config.rho,
        };
        solver.z_l = solver.rows.apply(&DVector::zeros(m));
        Ok(solver)
    }

    /// Seeds the primal iterate with `split` (multipliers reset to zero).
    pub fn warm_start(&mut self, split: &HGramianSplit) -> Result<()> {
        let n = self.problem.n;
        for g in [&split.g_plus, &split.g_minus] {
            if g.shape() != (n, n) {
                return Err(crate::error::HdmError::DimensionMismatch {
                    expected: n,
                    got: g.nrows(),
                });
            }
        }
        self.x_a = self.layout.svec(&split.g_plus);
        self.x_b = self.layout.svec(&split.g_minus);
        self.z_a = self.x_a.clone();
        self.z_b = self.x_b.clone();
        project_svec_psd(&self.layout, &mut self.z_a)?;
        project_svec_psd(&self.layout, &mut self.z_b)?;
        self.z_l = self.rows.apply(&(&self.x_a - &self.x_b));
        self.y_a.fill(0.0);
        self.y_b.fill(0.0);
        self.y_l.fill(0.0);
        Ok(())
    }

    /// Constraint residual (natural units) of the current iterate, before any step.
    pub fn initial_primal_residual(&self) -> f64 {
        let split = self.current_split();
        constraint_residual(&self.problem, &split.gramian())
    }

    pub fn problem(&self) -> &SplitSdpProblem {
        &self.problem
    }

    fn current_split(&self) -> HGramianSplit {
        HGramianSplit {
            g_plus: self.layout.smat(&self.z_a),
            g_minus: self.layout.smat(&self.z_b),
        }
    }

    fn factor(&self) -> Result<Cholesky<f64, Dyn>> {
        let k = self.rows.kkt_matrix(self.layout.len(), self.config.sigma, self.rho);
        Cholesky::new(k).ok_or_else(|| {
            crate::error::HdmError::Numeric("KKT matrix is not positive definite".into())
        })
    }

    fn rho_vec(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            (0..self.rows.len()).map(|k| self.rows.row_rho(k, self.rho)),
        )
    }

    fn dual_residual(&self) -> f64 {
        let bt = self.rows.apply_t(&self.y_l, self.layout.len());
        let ra = &self.q_a + &self.y_a + &bt;
        let rb = &self.q_b + &self.y_b - &bt;
        let aty = (&self.y_a + &bt).amax().max((&self.y_b - &bt).amax());
        let scale = self.q_a.amax().max(self.q_b.amax()).max(aty).max(1e-12);
        ra.amax().max(rb.amax()) / scale
    }

    fn internal_primal(&self) -> f64 {
        let u = &self.x_a - &self.x_b;
        let bl = self.rows.apply(&u);
        let r = (&self.x_a - &self.z_a)
            .amax()
            .max((&self.x_b - &self.z_b).amax())
            .max((&bl - &self.z_l).amax());
        let scale = self
            .x_a
            .amax()
            .max(self.x_b.amax())
            .max(bl.amax())
            .max(self.z_a.amax())
            .max(self.z_b.amax())
            .max(self.z_l.amax())
            .max(1e-12);
        r / scale
    }

    fn residuals(&self) -> Residuals {
        let split = self.current_split();
        Residuals {
            primal: constraint_residual(&self.problem, &split.gramian()),
            dual: self.dual_residual(),
        }
    }

    /// Runs ADMM from the current state; returns the best iterate seen.
    pub fn solve(&mut self) -> Result<(HGramianSplit, SolverReport)> {
        let cfg = self.config.clone();
        let m = self.layout.len();
        let sigma = cfg.sigma;
        let alpha = cfg.relaxation;
        let mut chol = self.factor()?;
        let mut rho_l = self.rho_vec();

        let mut best: Option<(f64, HGramianSplit, Residuals, usize)> = None;
        let mut iterations = 0;
        let mut converged = false;

        for it in 1..=cfg.max_iters {
            iterations = it;
            let w_l = rho_l.component_mul(&self.z_l) - &self.y_l;
            let bt = self.rows.apply_t(&w_l, m);
            let rhs_a = &self.x_a * sigma - &self.q_a + &self.z_a * self.rho - &self.y_a + &bt;
            let rhs_b = &self.x_b * sigma - &self.q_b + &self.z_b * self.rho - &self.y_b - &bt;
            let v = (&rhs_a + &rhs_b) / (sigma + self.rho);
            let u = chol.solve(&(&rhs_a - &rhs_b));
            let xt_a = (&v + &u) * 0.5;
            let xt_b = (&v - &u) * 0.5;
            let zt_l = self.rows.apply(&u);

            self.x_a = &xt_a * alpha + &self.x_a * (1.0 - alpha);
            self.x_b = &xt_b * alpha + &self.x_b * (1.0 - alpha);

            let zh_a = &xt_a * alpha + &self.z_a * (1.0 - alpha);
            let mut za = &zh_a + &self.y_a / self.rho;
            project_svec_psd(&self.layout, &mut za)?;
            self.y_a += (&zh_a - &za) * self.rho;
            self.z_a = za;

            let zh_b = &xt_b * alpha + &self.z_b * (1.0 - alpha);
            let mut zb = &zh_b + &self.y_b / self.rho;
            project_svec_psd(&self.layout, &mut zb)?;
            self.y_b += (&zh_b - &zb) * self.rho;
            self.z_b = zb;

            let zh_l = &zt_l * alpha + &self.z_l * (1.0 - alpha);
            let mut zl = &zh_l + self.y_l.component_div(&rho_l);
            self.rows.project(&mut zl);
            self.y_l += (&zh_l - &zl).component_mul(&rho_l);
            self.z_l = zl;

            let check = it % cfg.check_every == 0 || it == cfg.max_iters;
            if check {
                let res = self.residuals();
                let score = (res.primal / cfg.tol_primal).max(res.dual / cfg.tol_dual);
                if best.as_ref().is_none_or(|b| score < b.0) {
                    best = Some((score, self.current_split(), res, it));
                }
                if best.as_ref().is_some_and(|b| b.0 <= 1.0) {
                    converged = true;
                    break;
                }
            }

            if it % cfg.adapt_every == 0 {
                let p = self.internal_primal();
                let d = self.dual_residual();
                let ratio = p / d.max(1e-300);
                let new_rho = if ratio > 10.0 {
                    (self.rho * 2.0).min(RHO_MAX)
                } else if ratio < 0.1 {
                    (self.rho * 0.5).max(RHO_MIN)
                } else {
                    self.rho
                };
                if new_rho != self.rho {
                    self.rho = new_rho;
                    chol = self.factor()?;
                    rho_l = self.rho_vec();
                }
            }
        }

        let (_, split, res, _) = best.expect("at least one residual check runs");
        let g = split.gramian();
        let report = SolverReport {
            iterations,
            primal_residual: res.primal,
            dual_residual: res.dual,
            objective: objective(&self.problem, &split),
            converged,
            slacks: ordinal_slacks(&self.problem, &g),
            rho: self.rho,
            logdet_history: Vec::new(),
        };
        Ok((split, report))
    }
}

fn objective(problem: &SplitSdpProblem, split: &HGramianSplit) -> f64 {
    problem.weight_plus.component_mul(&split.g_plus).sum()
        + problem.weight_minus.component_mul(&split.g_minus).sum()
}

fn ordinal_margins(problem: &SplitSdpProblem, g: &DMatrix<f64>) -> Vec<f64> {
    problem.ordinal.iter().map(|c| c.margin(g)).collect()
}

/// Slacks of the nearest budget-feasible margins: `s = (eps2 - P_T(L(G)))_+`.
fn ordinal_slacks(problem: &SplitSdpProblem, g: &DMatrix<f64>) -> Vec<f64> {
    let mut p = ordinal_margins(problem, g);
    project_ordinal(&mut p, problem.epsilon2, problem.slack_budget.unwrap_or(0.0));
    p.iter().map(|&v| (problem.epsilon2 - v).max(0.0)).collect()
}

/// Worst constraint violation of `G` in natural units.
pub(crate) fn constraint_residual(problem: &SplitSdpProblem, g: &DMatrix<f64>) -> f64 {
    let n = problem.n;
    let cap = problem.offdiag_cap();
    let mut r: f64 = 0.0;
    for i in 0..n {
        r = r.max((g[(i, i)] + 1.0).abs());
        for j in 0..i {
            r = r.max(0.5 * (g[(i, j)] + g[(j, i)]) - cap);
        }
    }
    if problem.mask.count() > 0 {
        let rad = problem.epsilon1.sqrt();
        let fid = problem.fidelity(g).sqrt();
        r = r.max((fid - rad).max(0.0) / rad);
    }
    if !problem.ordinal.is_empty() {
        let l = ordinal_margins(problem, g);
        let mut p = l.clone();
        project_ordinal(&mut p, problem.epsilon2, problem.slack_budget.unwrap_or(0.0));
        let gap = l.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        r = r.max(gap);
    }
    r
}

/// Solves the relaxation; with `config.logdet_rounds > 0` the trace solution
/// is refined by log-det reweighting, each round warm-started from the last.
pub fn solve_split_sdp(
    problem: &SplitSdpProblem,
    config: &SolverConfig,
) -> Result<(HGramianSplit, SolverReport)> {
    let mut solver = SplitSdpSolver::new(problem, config)?;
    let (mut split, mut report) = solver.solve()?;
    if config.logdet_rounds == 0 {
        return Ok((split, report));
    }

    let mut history = Vec::with_capacity(config.logdet_rounds + 1);
    let mut total_iters = report.iterations;
    for k in 0..config.logdet_rounds {
        let delta = config.logdet_delta(k);
        let current = logdet_value(&split, delta)?;
        history.push(current);
        let (wp, wm) = logdet_reweight(&split, delta)?;
        let weighted = problem.clone().with_weights(wp, wm);
        let mut round = SplitSdpSolver::new(&weighted, config)?;
        round.warm_start(&split)?;
        let (cand, cand_report) = round.solve()?;
        total_iters += cand_report.iterations;
        // Majorize-minimize step: accept only if the surrogate decreased the
        // log-det objective and the candidate is at least as feasible.
        let improves = logdet_value(&cand, delta)? <= current;
        let feasible = cand_report.converged || !report.converged;
        if improves && feasible {
            split = cand;
            report = cand_report;
        }
    }
    history.push(logdet_value(&split, config.logdet_delta(config.logdet_rounds))?);

    let g = split.gramian();
    report.objective = objective(problem, &split);
    report.slacks = ordinal_slacks(problem, &g);
    report.iterations = total_iters;
    report.logdet_history = history;
    Ok((split, report))
}

fn logdet_value(split: &HGramianSplit, delta: f64) -> Result<f64> {
    Ok(logdet_shifted(&split.g_plus, delta)? + logdet_shifted(&split.g_minus, delta)?)
}
