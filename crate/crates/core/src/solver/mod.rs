//! First-order conic solvers: the split-PSD relaxation for hyperbolic
//! Gramians and the PSD-constrained least-squares Euclidean baseline.

mod euclidean;
mod psd;
mod split;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HdmError, Result};
use crate::gramian::{Hdm, ObservationMask};

pub use euclidean::{k_operator, solve_psd_least_squares, PsdLeastSquares};
pub use psd::{logdet_reweight, logdet_shifted, psd_project};
pub use split::{solve_split_sdp, SplitSdpSolver};

/// Distances above this are rejected: `cosh(20)` is already ~2.4e8.
pub const MAX_DISTANCE: f64 = 20.0;

/// `d(x_i1, x_i2) <= d(x_i3, x_i4)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[usize; 4]", into = "[usize; 4]")]
pub struct OrdinalConstraint {
    pub i1: usize,
    pub i2: usize,
    pub i3: usize,
    pub i4: usize,
}

impl OrdinalConstraint {
    /// Builds a comparison, ordering each pair so that `i1 < i2` and `i3 < i4`.
    pub fn new(a: usize, b: usize, c: usize, d: usize) -> Result<Self> {
        if a == b || c == d {
            return Err(HdmError::InvalidArgument(format!(
                "comparison ({a},{b},{c},{d}) contains a degenerate pair"
            )));
        }
        let (i1, i2) = (a.min(b), a.max(b));
        let (i3, i4) = (c.min(d), c.max(d));
        if (i1, i2) == (i3, i4) {
            return Err(HdmError::InvalidArgument(format!(
                "comparison ({a},{b},{c},{d}) compares a pair with itself"
            )));
        }
        Ok(Self { i1, i2, i3, i4 })
    }

    pub fn max_index(&self) -> usize {
        self.i1.max(self.i2).max(self.i3).max(self.i4)
    }

    /// `L(G) = G[i1,i2] - G[i3,i4]`; nonnegative iff the comparison holds.
    pub fn margin(&self, g: &DMatrix<f64>) -> f64 {
        g[(self.i1, self.i2)] - g[(self.i3, self.i4)]
    }
}

impl TryFrom<[usize; 4]> for OrdinalConstraint {
    type Error = HdmError;

    fn try_from(v: [usize; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<OrdinalConstraint> for [usize; 4] {
    fn from(c: OrdinalConstraint) -> Self {
        [c.i1, c.i2, c.i3, c.i4]
    }
}

/// The split-PSD semidefinite relaxation:
///
/// ```text
/// minimize    Tr(W+ G+) + Tr(W- G-)
/// subject to  G = G+ - G-,  G+, G- PSD
///             diag(G) = -1
///             G_ij <= -cosh(l)                  (i != j; l = 0 unless a minimum distance is set)
///             ||W o (cosh[D] + G)||_F^2 <= eps1
///             G_i1i2 - G_i3i4 + s_k >= eps2,  s >= 0,  sum s <= zeta
/// ```
#[derive(Debug, Clone)]
pub struct SplitSdpProblem {
    pub n: usize,
    pub weight_plus: DMatrix<f64>,
    pub weight_minus: DMatrix<f64>,
    pub mask: ObservationMask,
    pub target_cosh: DMatrix<f64>,
    pub epsilon1: f64,
    pub ordinal: Vec<OrdinalConstraint>,
    pub epsilon2: f64,
    pub min_distance: Option<f64>,
    pub slack_budget: Option<f64>,
}

pub const DEFAULT_EPSILON2: f64 = 1e-2;
/// Default fidelity budget relative to `||W o cosh[D]||_F^2`.
pub const DEFAULT_RELATIVE_EPSILON1: f64 = 1e-10;

impl SplitSdpProblem {
    /// Trace objective, no data.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            weight_plus: DMatrix::identity(n, n),
            weight_minus: DMatrix::identity(n, n),
            mask: ObservationMask::empty(n),
            target_cosh: DMatrix::zeros(n, n),
            epsilon1: 1.0,
            ordinal: Vec::new(),
            epsilon2: DEFAULT_EPSILON2,
            min_distance: None,
            slack_budget: None,
        }
    }

    /// Attaches measured distances; `epsilon1` is reset to its default
    /// relative to the measured data.
    pub fn with_distances(mut self, d: &Hdm, mask: &ObservationMask) -> Result<Self> {
        if d.n() != self.n || mask.n() != self.n {
            return Err(HdmError::DimensionMismatch {
                expected: self.n,
                got: d.n().max(mask.n()),
            });
        }
        let mut target = DMatrix::zeros(self.n, self.n);
        for (i, j) in mask.measured_pairs() {
            let v = d.get(i, j);
            if v > MAX_DISTANCE {
                return Err(HdmError::InvalidArgument(format!(
                    "distance {v} at ({i},{j}) exceeds the cap {MAX_DISTANCE}"
                )));
            }
            target[(i, j)] = v.cosh();
            target[(j, i)] = v.cosh();
        }
        self.mask = mask.clone();
        self.target_cosh = target;
        self.epsilon1 = (DEFAULT_RELATIVE_EPSILON1 * self.masked_target_norm_sq()).max(f64::MIN_POSITIVE);
        Ok(self)
    }

    /// Sets `epsilon1 = rel * ||W o cosh[D]||_F^2`.
    pub fn with_relative_epsilon1(mut self, rel: f64) -> Self {
        self.epsilon1 = (rel * self.masked_target_norm_sq()).max(f64::MIN_POSITIVE);
        self
    }

    pub fn with_epsilon1(mut self, eps1: f64) -> Self {
        self.epsilon1 = eps1;
        self
    }

    pub fn with_ordinal(mut self, constraints: Vec<OrdinalConstraint>, eps2: f64) -> Self {
        self.ordinal = constraints;
        self.epsilon2 = eps2;
        self
    }

    pub fn with_min_distance(mut self, l: f64) -> Self {
        self.min_distance = Some(l);
        self
    }

    pub fn with_slack_budget(mut self, zeta: f64) -> Self {
        self.slack_budget = Some(zeta);
        self
    }

    pub fn with_weights(mut self, plus: DMatrix<f64>, minus: DMatrix<f64>) -> Self {
        self.weight_plus = plus;
        self.weight_minus = minus;
        self
    }

    /// `||W o cosh[D]||_F^2`, counting both triangles.
    pub fn masked_target_norm_sq(&self) -> f64 {
        self.mask
            .measured_pairs()
            .iter()
            .map(|&(i, j)| 2.0 * self.target_cosh[(i, j)].powi(2))
            .sum()
    }

    /// `||W o (cosh[D] + G)||_F^2`.
    pub fn fidelity(&self, g: &DMatrix<f64>) -> f64 {
        self.mask
            .measured_pairs()
            .iter()
            .map(|&(i, j)| {
                let r = self.target_cosh[(i, j)] + 0.5 * (g[(i, j)] + g[(j, i)]);
                2.0 * r * r
            })
            .sum()
    }

    /// Upper bound imposed on every off-diagonal entry of `G`.
    pub fn offdiag_cap(&self) -> f64 {
        -self.min_distance.unwrap_or(0.0).cosh()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(HdmError::InvalidArgument("empty problem".into()));
        }
        for (name, m) in [
            ("weight_plus", &self.weight_plus),
            ("weight_minus", &self.weight_minus),
            ("target_cosh", &self.target_cosh),
        ] {
            if m.shape() != (n, n) {
                return Err(HdmError::InvalidArgument(format!(
                    "{name} has shape {:?}, expected ({n}, {n})",
                    m.shape()
                )));
            }
        }
        if self.mask.n() != n {
            return Err(HdmError::DimensionMismatch {
                expected: n,
                got: self.mask.n(),
            });
        }
        if !(self.epsilon1 > 0.0) {
            return Err(HdmError::InvalidArgument("epsilon1 must be positive".into()));
        }
        if !(self.epsilon2 > 0.0) {
            return Err(HdmError::InvalidArgument("epsilon2 must be positive".into()));
        }
        if let Some(z) = self.slack_budget {
            if !(z >= 0.0) {
                return Err(HdmError::InvalidArgument("slack budget must be >= 0".into()));
            }
        }
        if let Some(l) = self.min_distance {
            if !(l >= 0.0) || l > MAX_DISTANCE {
                return Err(HdmError::InvalidArgument(format!(
                    "minimum distance {l} outside [0, {MAX_DISTANCE}]"
                )));
            }
        }
        for (i, j) in self.mask.measured_pairs() {
            if !self.target_cosh[(i, j)].is_finite() {
                return Err(HdmError::InvalidArgument(format!(
                    "target at measured pair ({i},{j}) is not finite"
                )));
            }
        }
        for c in &self.ordinal {
            if c.max_index() >= n {
                return Err(HdmError::InvalidArgument(format!(
                    "ordinal constraint {c:?} out of range for n = {n}"
                )));
            }
        }
        Ok(())
    }
}

/// Solver knobs. Tolerances are relative; see [`SolverReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub rho: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    /// 0 selects the trace objective; `k > 0` adds `k` log-det reweighting rounds.
    pub logdet_rounds: usize,
    /// `delta_k = logdet_delta0 * 2^-k`.
    pub logdet_delta0: f64,
    pub sigma: f64,
    pub relaxation: f64,
    pub check_every: usize,
    pub adapt_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            rho: 1.0,
            tol_primal: 1e-6,
            tol_dual: 1e-6,
            logdet_rounds: 0,
            logdet_delta0: 1e-2,
            sigma: 1e-6,
            relaxation: 1.6,
            check_every: 10,
            adapt_every: 50,
        }
    }
}

impl SolverConfig {
    pub fn logdet_delta(&self, round: usize) -> f64 {
        self.logdet_delta0 * 0.5f64.powi(round as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(HdmError::InvalidArgument("max_iters must be >= 1".into()));
        }
        for (name, v) in [
            ("rho", self.rho),
            ("tol_primal", self.tol_primal),
            ("tol_dual", self.tol_dual),
            ("logdet_delta0", self.logdet_delta0),
            ("sigma", self.sigma),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(HdmError::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(HdmError::InvalidArgument("relaxation must lie in (0, 2)".into()));
        }
        if self.check_every == 0 || self.adapt_every == 0 {
            return Err(HdmError::InvalidArgument("check intervals must be >= 1".into()));
        }
        Ok(())
    }
}

/// Diagnostics of a solve.
///
/// `primal_residual` is the worst constraint violation of the returned split
/// in natural units: `|G_ii + 1|`, the excess of `G_ij` over its cap, the
/// ordinal margin shortfall net of slacks, and the fidelity excess relative to
/// `sqrt(eps1)`. `dual_residual` is the relative stationarity residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub converged: bool,
    /// One slack per ordinal constraint (all zero without a slack budget).
    pub slacks: Vec<f64>,
    pub rho: f64,
    /// `sum log det(G +- delta_k I)` per log-det round; empty for the trace objective.
    pub logdet_history: Vec<f64>,
}
